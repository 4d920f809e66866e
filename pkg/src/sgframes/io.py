"""File formats: edge lists, MatrixMarket, atomic writes.

Edge list: one ``u v w`` per line, 0-based, ``#`` comments. A leading
``# nodes: N`` comment fixes the vertex count (otherwise max index + 1).
MatrixMarket: coordinate real symmetric for graphs (1-based, lower
triangle), coordinate real general for frames, array real general for
dense filter matrices. Floats are written with 17 significant digits so
every round trip is exact.
"""

from __future__ import annotations

import contextlib
import os
import tempfile
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InputError, ParseError
from .graph import Graph

FLOAT_FMT = "%.17g"


@contextlib.contextmanager
def atomic_write(path, mode="w"):
    """Write to a temp file beside ``path`` and rename it on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


# -- edge lists -------------------------------------------------------------

def write_edgelist(g: Graph, path) -> None:
    with atomic_write(path) as fh:
        fh.write(f"# nodes: {g.n}\n")
        for a, b, c in g.edges:
            fh.write(f"{a} {b} {_fmt(c)}\n")


def read_edgelist(path) -> Graph:
    n = None
    edges = []
    seen = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                body = text[1:].strip()
                if body.lower().startswith("nodes:"):
                    try:
                        n = int(body.split(":", 1)[1])
                    except ValueError:
                        raise ParseError("bad node count", f"line {lineno}") from None
                continue
            parts = text.split()
            if len(parts) != 3:
                raise ParseError(f"expected 'u v w', got {len(parts)} fields", f"line {lineno}")
            try:
                a, b, c = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError(f"cannot parse {text!r}", f"line {lineno}") from None
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ParseError(f"duplicate edge {key}", f"line {lineno}")
            seen.add(key)
            edges.append((a, b, c))
    if n is None:
        n = 1 + max((max(a, b) for a, b, _ in edges), default=0)
    try:
        return Graph(n, edges)
    except InputError as exc:
        raise ParseError(str(exc), str(path)) from exc


# -- MatrixMarket -------------------------------------------------------------

def _mm_header(lines, path):
    """Return (header tokens, size line tokens, remaining line iterator)."""
    try:
        first = next(lines)
    except StopIteration:
        raise ParseError("empty file", str(path)) from None
    tokens = first[1].strip().lower().split()
    if len(tokens) != 5 or tokens[0] != "%%matrixmarket" or tokens[1] != "matrix":
        raise ParseError("missing %%MatrixMarket header", f"line {first[0]}")
    for lineno, line in lines:
        text = line.strip()
        if text and not text.startswith("%"):
            return tokens[2:], (lineno, text.split())
    raise ParseError("missing size line", str(path))


def _numbered(fh):
    return ((i, line) for i, line in enumerate(fh, 1))


def _read_mm_raw(path):
    with open(path) as fh:
        lines = _numbered(fh)
        (fmt, field, symm), (size_no, size) = _mm_header(lines, path)
        if field not in ("real", "integer", "double"):
            raise ParseError(f"unsupported field {field!r}", "line 1")
        try:
            dims = [int(x) for x in size]
        except ValueError:
            raise ParseError("bad size line", f"line {size_no}") from None
        body = [(i, l.split()) for i, l in lines if l.strip() and not l.lstrip().startswith("%")]
    if fmt == "array":
        if len(dims) != 2:
            raise ParseError("array size line needs 2 integers", f"line {size_no}")
        rows, cols = dims
        if len(body) != rows * cols:
            raise ParseError(f"expected {rows * cols} values, found {len(body)}", str(path))
        try:
            vals = np.array([float(t[0]) for _, t in body])
        except (ValueError, IndexError):
            raise ParseError("bad value", str(path)) from None
        return vals.reshape(cols, rows).T.copy()
    if fmt != "coordinate":
        raise ParseError(f"unsupported format {fmt!r}", "line 1")
    if len(dims) != 3:
        raise ParseError("coordinate size line needs 3 integers", f"line {size_no}")
    rows, cols, nnz = dims
    if len(body) != nnz:
        raise ParseError(f"expected {nnz} entries, found {len(body)}", str(path))
    r = np.empty(nnz, dtype=np.int64)
    c = np.empty(nnz, dtype=np.int64)
    x = np.empty(nnz)
    for idx, (lineno, tok) in enumerate(body):
        if len(tok) != 3:
            raise ParseError("expected 'row col value'", f"line {lineno}")
        try:
            r[idx], c[idx], x[idx] = int(tok[0]) - 1, int(tok[1]) - 1, float(tok[2])
        except ValueError:
            raise ParseError(f"cannot parse {' '.join(tok)!r}", f"line {lineno}") from None
        if not (0 <= r[idx] < rows and 0 <= c[idx] < cols):
            raise ParseError("index out of range", f"line {lineno}")
    if symm not in ("symmetric", "general"):
        raise ParseError(f"unsupported symmetry {symm!r}", "line 1")
    return (r, c, x, (rows, cols), symm)


def read_mm(path):
    """Read a MatrixMarket file into a dense array or a CSR matrix."""
    raw = _read_mm_raw(path)
    if isinstance(raw, np.ndarray):
        return raw
    r, c, x, shape, symm = raw
    if symm == "symmetric":
        off = r != c
        r, c, x = np.concatenate([r, c[off]]), np.concatenate([c, r[off]]), np.concatenate([x, x[off]])
    return sp.csr_matrix((x, (r, c)), shape=shape)


def write_mm_coordinate(M, path, symmetric=False) -> None:
    M = sp.coo_matrix(M)
    r, c, x = M.row, M.col, M.data
    if symmetric:
        keep = r >= c
        r, c, x = r[keep], c[keep], x[keep]
    order = np.lexsort((r, c))
    kind = "symmetric" if symmetric else "general"
    with atomic_write(path) as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {kind}\n")
        fh.write(f"{M.shape[0]} {M.shape[1]} {r.size}\n")
        for i in order.tolist():
            fh.write(f"{r[i] + 1} {c[i] + 1} {_fmt(x[i])}\n")


def write_mm_array(M, path) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with atomic_write(path) as fh:
        fh.write("%%MatrixMarket matrix array real general\n")
        fh.write(f"{M.shape[0]} {M.shape[1]}\n")
        for value in M.T.ravel():
            fh.write(_fmt(value) + "\n")


def write_graph_mm(g: Graph, path) -> None:
    W = sp.coo_matrix((g.w, (g.v, g.u)), shape=(g.n, g.n))
    write_mm_coordinate(W, path, symmetric=True)


def read_graph_mm(path) -> Graph:
    raw = _read_mm_raw(path)
    if isinstance(raw, np.ndarray) or raw[3][0] != raw[3][1] or raw[4] != "symmetric":
        raise ParseError("graph must be square coordinate symmetric data", str(path))
    r, c, x, (n, _), _ = raw
    try:
        return Graph.from_arrays(n, r, c, x)
    except InputError as exc:
        raise ParseError(str(exc), str(path)) from exc


def _is_mm(path) -> bool:
    with open(path) as fh:
        return fh.readline().lower().startswith("%%matrixmarket")


def read_graph(path) -> Graph:
    """Load a graph, sniffing MatrixMarket vs edge-list format."""
    if _is_mm(path):
        return read_graph_mm(path)
    return read_edgelist(path)


def write_graph(g: Graph, path) -> None:
    if str(path).endswith(".mtx"):
        write_graph_mm(g, path)
    else:
        write_edgelist(g, path)


def read_signal(path) -> np.ndarray:
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                values.append(float(text))
            except ValueError:
                raise ParseError(f"cannot parse {text!r}", f"line {lineno}") from None
    return np.asarray(values)


def write_signal(f, path) -> None:
    with atomic_write(path) as fh:
        for value in np.asarray(f, dtype=float).ravel():
            fh.write(_fmt(value) + "\n")
