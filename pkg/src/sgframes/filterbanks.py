"""Per-node filter pairs ``(A, B)`` and the unitary-extension check.

A pair is valid when the rows of ``A`` are orthonormal, every row of ``B``
is orthogonal to every row of ``A``, and ``B.T @ B == I - A.T @ A``.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError, ConnectivityError, InputError, ParseError
from .graph import Graph, is_connected, spanning_tree_family, spectrum
from .io import read_mm, write_mm_array
from .partition import PartitionTree, subgraph_of

log = logging.getLogger(__name__)

VARIANTS = ("haar", "eigen", "tree")
UEP_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class FilterPair:
    A: np.ndarray
    B: np.ndarray
    variant: str
    node: Optional[tuple] = None
    source: Optional[str] = None

    @property
    def r(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[0]

    @property
    def c(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class UEPReport:
    orthonormality: float
    orthogonality: float
    complement: float
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.orthonormality, self.orthogonality, self.complement) <= self.tol

    def __str__(self):
        return (f"|AA^T - I| = {self.orthonormality:.3e}, |BA^T| = {self.orthogonality:.3e}, "
                f"|B^TB - (I - A^TA)| = {self.complement:.3e} "
                f"({'pass' if self.passed else 'FAIL'} at {self.tol:g})")


def verify_uep(fp: FilterPair, tol: float = UEP_TOL) -> UEPReport:
    A, B = fp.A, fp.B
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        inf = float("inf")
        return UEPReport(inf, inf, inf, tol)
    eye = np.eye(A.shape[1])
    ortho = np.abs(A @ A.T - np.eye(A.shape[0])).max(initial=0.0)
    cross = np.abs(B @ A.T).max(initial=0.0)
    comp = np.abs(B.T @ B - (eye - A.T @ A)).max(initial=0.0)
    return UEPReport(float(ortho), float(cross), float(comp), tol)


def haar_row_index(s: int, t: int, c: int) -> int:
    """1-based row of the Haar difference for the 1-based pair ``s < t``."""
    return (2 * c - s) * (s - 1) // 2 + (t - s)


@lru_cache(maxsize=None)
def _haar_matrices(c: int):
    scale = 1.0 / np.sqrt(c)
    A = np.full((1, c), scale)
    B = np.zeros((c * (c - 1) // 2, c))
    row = 0
    for s in range(c):
        for t in range(s + 1, c):
            B[row, s] = scale
            B[row, t] = -scale
            row += 1
    A.setflags(write=False)
    B.setflags(write=False)
    return A, B


def haar_filterbank(c: int, node=None) -> FilterPair:
    """Haar-type pair: constant low-pass, one pairwise difference per ``s < t``."""
    if c < 2:
        raise InputError(f"cluster size must be at least 2, got {c}")
    A, B = _haar_matrices(int(c))
    return FilterPair(A, B, "haar", node, f"haar:{c}")


def eigen_filterbank(sub: Graph, r: int, node=None, permissive: bool = False) -> FilterPair:
    """First ``r`` Laplacian eigenvectors as low-pass, the rest as high-pass.

    Disconnected subgraphs are rejected unless ``permissive``, because the
    split of a repeated zero eigenvalue is basis dependent.
    """
    c = sub.n
    if not 1 <= r <= c - 1:
        raise InputError(f"r must lie in [1, {c - 1}] for a {c}-vertex subgraph, got {r}")
    if not permissive and not is_connected(sub):
        raise ConnectivityError(
            f"subgraph at node {node} is disconnected; use the haar variant or permissive mode")
    U = spectrum(sub).eigenvectors
    return FilterPair(U[:r].copy(), U[r:].copy(), "eigen", node, "laplacian")


def tree_filterbank(sub: Graph, node=None, maximum: bool = False) -> FilterPair:
    """Constant low-pass; high-pass stacks the non-constant eigenvectors of every
    spanning-tree family member, scaled by ``1/sqrt(N)``."""
    c = sub.n
    if c < 2:
        raise InputError(f"cluster size must be at least 2, got {c}")
    if not is_connected(sub):
        raise ConnectivityError(f"tree variant needs a connected subgraph at node {node}")
    family = spanning_tree_family(sub, maximum=maximum)
    N = len(family)
    B = np.vstack([spectrum(member).eigenvectors[1:] for member in family.members])
    B /= np.sqrt(N)
    A = np.full((1, c), 1.0 / np.sqrt(c))
    return FilterPair(A, B, "tree", node, f"spanning-trees:{N}")


def _normalize_schedule(r_schedule, J) -> list[int]:
    if r_schedule is None:
        return [1] * J
    if isinstance(r_schedule, (int, np.integer)):
        return [int(r_schedule)] * J
    sched = [int(x) for x in r_schedule]
    if len(sched) == 1:
        return sched * J
    if len(sched) != J:
        raise ConfigurationError(f"r_schedule needs {J} entries, got {len(sched)}")
    return sched


def make_filterbanks(t: PartitionTree, variant: str,
                     r_schedule: Union[int, Sequence[int], None] = None,
                     permissive: bool = False, maximum: bool = False,
                     workers: Optional[int] = None, tol: float = UEP_TOL) -> dict:
    """One verified FilterPair per non-leaf node, keyed by ``(j, k)``."""
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    J = t.J
    if variant == "eigen":
        sched = _normalize_schedule(r_schedule, J)
        for j, r in enumerate(sched):
            smallest = min(len(node.children) for node in t.levels[j])
            if not 1 <= r <= smallest - 1:
                raise ConfigurationError(
                    f"level {j}: r = {r} is not in [1, {smallest - 1}] "
                    f"(smallest cluster has {smallest} children)")
    else:
        sched = [1] * J

    def build(node):
        key = (node.level, node.index)
        if variant == "haar":
            return key, haar_filterbank(len(node.children), key)
        sub = subgraph_of(t, *key).graph
        if variant == "eigen":
            return key, eigen_filterbank(sub, sched[node.level], key, permissive)
        return key, tree_filterbank(sub, key, maximum)

    nodes = list(t.internal_nodes())
    if workers is None:
        workers = int(os.environ.get("SGFRAMES_THREADS", "1"))
    if workers > 1 and variant != "haar" and len(nodes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(build, nodes))
    else:
        pairs = [build(node) for node in nodes]

    checked = {}
    for key, fp in pairs:
        ident = (id(fp.A), id(fp.B))
        if ident not in checked:
            report = verify_uep(fp, tol)
            checked[ident] = report
            if not report.passed:
                raise ConfigurationError(f"filter pair at node {key} fails UEP: {report}")
    log.debug("built %d %s filter pairs", len(pairs), variant)
    return dict(pairs)


def dump_filterbanks(banks: dict, directory) -> None:
    """Write ``A_j_k.mtx`` / ``B_j_k.mtx`` dense MatrixMarket files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for (j, k), fp in sorted(banks.items()):
        write_mm_array(fp.A, directory / f"A_{j}_{k}.mtx")
        write_mm_array(fp.B, directory / f"B_{j}_{k}.mtx")


def load_filterbanks(directory, variant: str = "external") -> dict:
    directory = Path(directory)
    banks = {}
    for a_path in sorted(directory.glob("A_*_*.mtx")):
        try:
            _, j, k = a_path.stem.split("_")
            key = (int(j), int(k))
        except ValueError:
            raise ParseError("bad filter file name", str(a_path)) from None
        b_path = directory / f"B_{key[0]}_{key[1]}.mtx"
        if not b_path.exists():
            raise ParseError("missing matching B file", str(b_path))
        A, B = read_mm(a_path), read_mm(b_path)
        if not isinstance(A, np.ndarray) or not isinstance(B, np.ndarray):
            raise ParseError("filters must be MatrixMarket array files", str(a_path))
        banks[key] = FilterPair(A, B, variant, key, str(a_path))
    return banks
