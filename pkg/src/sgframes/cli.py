"""Command-line front end.

Exit codes: 0 success, 1 validation or verification failure, 2 I/O or
parse error. Set ``SGFRAMES_LOG`` (e.g. ``DEBUG``) for verbose logging.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .bench import CSV_HEADER, error_curve, run_benchmark_file
from .errors import (ConfigurationError, ConnectivityError, InputError, NumericalError,
                     ParseError, VerificationError)
from .filterbanks import VARIANTS, dump_filterbanks, make_filterbanks
from .frame import build_frame, export_frame, import_frame, verify_tight
from .io import atomic_write, read_graph, read_signal, write_signal
from .partition import build_partition_tree, load_tree, save_tree, validate_partition_tree
from .transforms import analyze, load_coefficients, save_coefficients, synthesize

log = logging.getLogger("sgframes")


class ValidationFailure(Exception):
    """Signals exit code 1 with a message."""


@dataclass
class RunConfig:
    inputs: list = field(default_factory=list)
    output: Optional[str] = None
    variant: str = "haar"
    r: Optional[list] = None
    branching: int = 2
    connected: bool = False
    tol: float = 1e-8
    seed: int = 0
    threads: int = 1

    def validate(self):
        if self.variant not in VARIANTS:
            raise ValidationFailure(f"unknown variant {self.variant!r}")
        if self.variant in ("tree", "haar") and self.r and any(x != 1 for x in self.r):
            raise ValidationFailure(f"{self.variant} variant requires r = 1")
        if self.r and any(x < 1 for x in self.r):
            raise ValidationFailure("r values must be positive")
        if self.branching < 2:
            raise ValidationFailure("branching must be at least 2")
        if self.tol <= 0:
            raise ValidationFailure("tolerance must be positive")


def _config(args) -> RunConfig:
    cfg = RunConfig(
        variant=getattr(args, "variant", "haar"),
        r=getattr(args, "r", None),
        branching=getattr(args, "branching", 2),
        connected=getattr(args, "connected", False),
        tol=getattr(args, "tol", 1e-8),
        threads=args.threads,
    )
    cfg.validate()
    return cfg


def _load_pipeline(args, cfg: RunConfig):
    g = read_graph(args.graph)
    tree = load_tree(args.tree)
    if tree.original != g:
        raise ValidationFailure("the tree's finest coarse graph does not match the input graph")
    report = validate_partition_tree(tree)
    if not report.passed:
        raise ValidationFailure(f"invalid partition tree:\n{report}")
    banks = make_filterbanks(tree, cfg.variant, cfg.r, permissive=getattr(args, "permissive", False),
                             maximum=getattr(args, "maximum_spanning", False), workers=cfg.threads)
    return g, tree, banks


def cmd_build_tree(args):
    cfg = _config(args)
    g = read_graph(args.graph)
    tree = build_partition_tree(g, cfg.branching, cfg.connected)
    report = validate_partition_tree(tree)
    if not report.passed:
        raise ValidationFailure(f"built tree failed validation:\n{report}")
    save_tree(tree, args.output)
    print(f"J = {tree.J}, level sizes = {tree.level_sizes()}")


def cmd_build_frame(args):
    cfg = _config(args)
    _, tree, banks = _load_pipeline(args, cfg)
    fa = build_frame(tree, banks)
    report = verify_tight(fa, cfg.tol)
    if not report.passed:
        raise ValidationFailure(f"frame is not tight: {report}")
    export_frame(fa, args.output)
    if args.dump_filters:
        dump_filterbanks(banks, args.dump_filters)
    print(f"m = {fa.m} atoms on n = {fa.n} vertices; {report}")


def cmd_verify(args):
    cfg = _config(args)
    fa = import_frame(args.frame)
    report = verify_tight(fa, cfg.tol)
    print(f"max tightness deviation {report.deviation:.3e}")
    print(report)
    if not report.passed:
        raise ValidationFailure("verification failed")


def cmd_analyze(args):
    cfg = _config(args)
    _, tree, banks = _load_pipeline(args, cfg)
    f = read_signal(args.signal)
    coef = analyze(f, tree, banks)
    save_coefficients(coef, args.output)


def cmd_synthesize(args):
    cfg = _config(args)
    _, tree, banks = _load_pipeline(args, cfg)
    coef = load_coefficients(args.coefficients, tree, banks)
    write_signal(synthesize(coef, tree, banks), args.output)


def cmd_nlapprox(args):
    cfg = _config(args)
    g, tree, banks = _load_pipeline(args, cfg)
    fa = build_frame(tree, banks)
    f = read_signal(args.signal)
    try:
        Ks = [fa.m if k.strip() == "m" else int(k) for k in args.K.split(",")]
    except ValueError:
        raise ValidationFailure(f"cannot parse --K {args.K!r}") from None
    results = error_curve(f, fa, Ks)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["K", "m", "rel_error"])
    for res in results:
        writer.writerow([res.K, res.m, repr(res.relative_error)])
    if args.output:
        with atomic_write(args.output) as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def cmd_bench(args):
    run_benchmark_file(args.config, args.output, workers=args.threads, plot_dir=args.plot_dir)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgframes",
                                     description="Subgraph-based tight frames on graphs.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, default=1, help="worker cap")
    sub = parser.add_subparsers(dest="command", required=True)

    def variant_opts(p):
        p.add_argument("--variant", choices=VARIANTS, default="haar")
        p.add_argument("--r", type=int, nargs="+", help="low-pass size per level (eigen)")
        p.add_argument("--permissive", action="store_true",
                       help="eigen variant: accept disconnected subgraphs")
        p.add_argument("--maximum-spanning", action="store_true",
                       help="tree variant: start from a maximum-weight spanning tree")

    p = sub.add_parser("build-tree", help="build a partition tree")
    p.add_argument("graph")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--branching", type=int, default=2)
    p.add_argument("--connected", action="store_true")
    p.set_defaults(func=cmd_build_tree)

    p = sub.add_parser("build-frame", help="assemble and export a frame")
    p.add_argument("graph")
    p.add_argument("tree")
    variant_opts(p)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--dump-filters", metavar="DIR")
    p.set_defaults(func=cmd_build_frame)

    p = sub.add_parser("verify", help="check tightness of an exported frame")
    p.add_argument("frame")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("analyze", help="fast analysis transform")
    p.add_argument("graph")
    p.add_argument("tree")
    p.add_argument("signal")
    variant_opts(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synthesize", help="fast synthesis transform")
    p.add_argument("graph")
    p.add_argument("tree")
    p.add_argument("coefficients")
    variant_opts(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("nlapprox", help="best K-term approximation errors")
    p.add_argument("graph")
    p.add_argument("tree")
    p.add_argument("signal")
    variant_opts(p)
    p.add_argument("--K", required=True, help="comma-separated K values ('m' = all)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_nlapprox)

    p = sub.add_parser("bench", help="run a benchmark configuration")
    p.add_argument("config")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--plot-dir")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("SGFRAMES_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ValidationFailure, ConfigurationError, VerificationError, ConnectivityError,
            InputError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
