"""Exception hierarchy shared by all modules."""


class FrameError(Exception):
    """Base class for every error raised by sgframes."""


class InputError(FrameError, ValueError):
    """Malformed or out-of-range arguments."""


class ConnectivityError(FrameError):
    """An operation that needs a connected graph received a disconnected one."""


class ConfigurationError(FrameError):
    """Inconsistent build configuration (r-schedule, missing filterbank, ...)."""


class VerificationError(FrameError):
    """A numerical identity (UEP, tightness) failed at build time."""


class NumericalError(FrameError):
    """Eigensolver or other numerical routine failure."""


class ParseError(FrameError):
    """Malformed input file. ``where`` carries a line number or field path."""

    def __init__(self, message, where=None):
        self.where = where
        if where is not None:
            message = f"{where}: {message}"
        super().__init__(message)
