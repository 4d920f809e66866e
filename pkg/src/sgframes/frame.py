"""Assembly of compactly supported tight frames from a partition tree.

Atom rows are ordered: the level-0 low-pass block, then the high-pass blocks
of level 0, 1, ..., J-1, node by node. Inside a block produced from ``m``
children carrying ``R`` basis rows each, row ``a * R + i`` is filter row
``a`` applied to the ``i``-th basis row of every child, which is exactly the
order in which the fast transform lays out coefficients.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, InputError, ParseError, VerificationError
from .filterbanks import FilterPair, UEP_TOL, verify_uep
from .io import atomic_write, read_mm, write_mm_coordinate
from .partition import PartitionTree

log = logging.getLogger(__name__)

LOW, HIGH = 0, 1
KIND_NAMES = ("low", "high")


def dec(basis_stack, r: int, A: np.ndarray, B: np.ndarray, check: bool = False):
    """Split the direct sum of ``m`` orthogonal ``r``-dimensional spaces.

    Parameters
    ----------
    basis_stack : sequence of m arrays, each r x n
        Orthonormal bases of mutually orthogonal subspaces.
    r : int
        Rows per basis.
    A, B : arrays with m columns
        A filter pair satisfying the unitary extension condition.
    check : bool
        Verify that the input rows are orthonormal.

    Returns
    -------
    low : (A.shape[0] * r) x n array
        Orthonormal basis of the low-pass part.
    high : (B.shape[0] * r) x n array
        Tight frame of the orthogonal complement inside the direct sum.
    """
    X = np.asarray(basis_stack, dtype=float)
    if X.ndim != 3:
        raise InputError("basis_stack must be a sequence of r x n matrices")
    m, rows, n = X.shape
    if rows != r:
        raise InputError(f"each basis must have r = {r} rows, got {rows}")
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if B.size == 0:
        B = np.zeros((0, m))
    if A.ndim != 2 or A.shape[1] != m or B.ndim != 2 or B.shape[1] != m:
        raise InputError(f"A and B must have {m} columns")
    if check:
        flat = X.reshape(m * r, n)
        dev = np.abs(flat @ flat.T - np.eye(m * r)).max(initial=0.0)
        if dev > 1e-8:
            raise InputError(f"input rows are not orthonormal (deviation {dev:.2e})")
    low = np.einsum("ak,kin->ain", A, X).reshape(A.shape[0] * r, n)
    high = np.einsum("bk,kin->bin", B, X).reshape(B.shape[0] * r, n)
    return low, high


@dataclass
class AtomBlock:
    """Atoms owned by one node, stored on the node's support only.

    ``vectors[:, i]`` is the coefficient on vertex ``support[i]``.
    """

    node: tuple
    kind: str
    vectors: np.ndarray
    support: np.ndarray

    def to_dense(self, n: int) -> np.ndarray:
        out = np.zeros((self.vectors.shape[0], n))
        out[:, self.support] = self.vectors
        return out


@dataclass
class FrameAtoms:
    """Frame atoms as a sparse ``m x n`` matrix plus per-row metadata.

    ``level``, ``node``, ``kind`` and ``position`` are length-``m`` arrays;
    ``supports`` maps ``(j, k)`` to the vertices covered by that node.
    """

    n: int
    atoms: sp.csr_matrix
    level: np.ndarray
    node: np.ndarray
    kind: np.ndarray
    position: np.ndarray
    supports: dict
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        m = self.atoms.shape[0]
        if self.atoms.shape[1] != self.n:
            raise InputError(f"atoms have {self.atoms.shape[1]} columns, expected n = {self.n}")
        if m < self.n:
            raise InputError(f"a frame needs m >= n atoms (m = {m}, n = {self.n})")
        for name in ("level", "node", "kind", "position"):
            if len(getattr(self, name)) != m:
                raise InputError(f"index field {name!r} has the wrong length")

    @property
    def m(self) -> int:
        return self.atoms.shape[0]

    def rows(self, j: int, k: Optional[int] = None, kind: Optional[str] = None) -> np.ndarray:
        mask = self.level == j
        if k is not None:
            mask &= self.node == k
        if kind is not None:
            mask &= self.kind == KIND_NAMES.index(kind)
        return np.flatnonzero(mask)

    def dense(self) -> np.ndarray:
        return self.atoms.toarray()


def _rj_products(r_levels: Sequence[int]) -> list[int]:
    # R[j] = r[j] * r[j+1] * ... * r[J-1], and R[J] = 1
    R = [1] * (len(r_levels) + 1)
    for j in range(len(r_levels) - 1, -1, -1):
        R[j] = R[j + 1] * r_levels[j]
    return R


def build_frame(t: PartitionTree, banks: dict, r_schedule: Optional[Sequence[int]] = None,
                tol: float = UEP_TOL, collect_blocks: bool = False):
    """Sweep the tree bottom-up applying :func:`dec` at every non-leaf node.

    Returns a :class:`FrameAtoms`; with ``collect_blocks`` also the list of
    :class:`AtomBlock` objects (every low and high block of every node).
    """
    J = t.J
    r_levels = []
    for j in range(J):
        rs = set()
        for node in t.levels[j]:
            fp = banks.get((j, node.index))
            if fp is None:
                raise ConfigurationError(f"no filter pair for node ({j}, {node.index})")
            if fp.c != len(node.children):
                raise ConfigurationError(
                    f"filter pair at ({j}, {node.index}) has {fp.c} columns "
                    f"but the node has {len(node.children)} children")
            rs.add(fp.r)
        if len(rs) != 1:
            raise ConfigurationError(f"level {j} mixes low-pass sizes {sorted(rs)}")
        r_levels.append(rs.pop())
    if r_schedule is not None:
        expected = [int(x) for x in r_schedule]
        if len(expected) == 1:
            expected *= J
        if expected != r_levels:
            raise ConfigurationError(f"filterbanks use r = {r_levels}, schedule says {expected}")
    R = _rj_products(r_levels)

    checked = set()
    for key, fp in banks.items():
        ident = (id(fp.A), id(fp.B))
        if ident in checked:
            continue
        report = verify_uep(fp, tol)
        if not report.passed:
            raise VerificationError(f"filter pair at node {key} fails UEP: {report}")
        checked.add(ident)

    n = t.n
    # per node: (local vectors R[j] x support size, support)
    low = [(np.ones((1, 1)), np.array([v], dtype=np.int64)) for v in range(n)]
    high_blocks: list[list] = [None] * J
    blocks = []
    if collect_blocks:
        for v in range(n):
            blocks.append(AtomBlock((J, v), "low", low[v][0], low[v][1]))
    for j in range(J - 1, -1, -1):
        Rc = R[j + 1]
        next_low = []
        level_high = []
        for node in t.levels[j]:
            kids = [low[c] for c in node.children]
            support = np.concatenate([s for _, s in kids])
            X = np.zeros((len(kids), Rc, support.size))
            offset = 0
            for i, (vec, s) in enumerate(kids):
                X[i, :, offset:offset + s.size] = vec
                offset += s.size
            fp: FilterPair = banks[(j, node.index)]
            lo, hi = dec(X, Rc, fp.A, fp.B)
            next_low.append((lo, support))
            level_high.append((hi, support))
            if collect_blocks:
                blocks.append(AtomBlock((j, node.index), "low", lo, support))
                blocks.append(AtomBlock((j, node.index), "high", hi, support))
        low = next_low
        high_blocks[j] = level_high

    rows, cols, vals = [], [], []
    lev, nod, kin, pos = [], [], [], []
    row0 = 0

    def emit(vectors, support, j, k, kind):
        nonlocal row0
        nr = vectors.shape[0]
        rr, cc = np.nonzero(vectors)
        rows.append(rr + row0)
        cols.append(support[cc])
        vals.append(vectors[rr, cc])
        lev.append(np.full(nr, j))
        nod.append(np.full(nr, k))
        kin.append(np.full(nr, kind))
        pos.append(np.arange(nr))
        row0 += nr

    emit(low[0][0], low[0][1], 0, 0, LOW)
    for j in range(J):
        for k, (hi, support) in enumerate(high_blocks[j]):
            emit(hi, support, j, k, HIGH)
    atoms = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(row0, n))
    supports = {(j, node.index): np.asarray(node.members, dtype=np.int64)
                for j, level in enumerate(t.levels) for node in level}
    variants = sorted({fp.variant for fp in banks.values()})
    config = {"variant": variants[0] if len(variants) == 1 else variants,
              "r_schedule": r_levels, "R": R}
    fa = FrameAtoms(n, atoms, np.concatenate(lev), np.concatenate(nod),
                    np.concatenate(kin), np.concatenate(pos), supports, config)
    log.debug("built frame with %d atoms on %d vertices", fa.m, n)
    if collect_blocks:
        return fa, blocks
    return fa


def expected_atom_count(t: PartitionTree, banks: dict) -> int:
    """Root low-pass size plus every high-pass block size."""
    r_levels = [banks[(j, 0)].r for j in range(t.J)]
    R = _rj_products(r_levels)
    return R[0] + sum(banks[(j, node.index)].m * R[j + 1]
                      for j in range(t.J) for node in t.levels[j])


@dataclass
class TightnessReport:
    deviation: float
    support_violations: list
    orthogonality: dict
    tol: float

    @property
    def passed(self) -> bool:
        worst = max(self.orthogonality.values(), default=0.0)
        return self.deviation <= self.tol and not self.support_violations and worst <= self.tol

    def __str__(self):
        worst = max(self.orthogonality.values(), default=0.0)
        return (f"max |atoms^T atoms - I| = {self.deviation:.3e}; "
                f"support violations: {len(self.support_violations)}; "
                f"max |<root low-pass, high-pass>| = {worst:.3e} "
                f"({'pass' if self.passed else 'FAIL'} at {self.tol:g})")


def verify_tight(fa: FrameAtoms, tol: float = 1e-8) -> TightnessReport:
    T = fa.atoms
    gram = (T.T @ T).tocsr() - sp.identity(fa.n, format="csr")
    deviation = float(abs(gram).max()) if gram.nnz else 0.0

    # owner[j, v] = index of the level-j cluster containing v
    levels = 1 + max((j for j, _ in fa.supports), default=0)
    owner = np.full((levels, fa.n), -1, dtype=np.int64)
    for (j, k), members in fa.supports.items():
        owner[j, members] = k
    coo = T.tocoo()
    nonzero = coo.data != 0
    r, c = coo.row[nonzero], coo.col[nonzero]
    lvl = fa.level[r]
    inside = (lvl < levels) & (owner[np.minimum(lvl, levels - 1), c] == fa.node[r])
    violations = np.unique(r[~inside]).tolist()

    phi0 = T[fa.rows(0, kind="low")]
    ortho = {}
    for j in sorted(set(fa.level[fa.kind == HIGH].tolist())):
        psi = T[fa.rows(j, kind="high")]
        prod = phi0 @ psi.T
        ortho[j] = float(abs(prod).max()) if prod.nnz else 0.0
    return TightnessReport(deviation, violations, ortho, tol)


# -- file round trip ---------------------------------------------------------

def index_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".index.json")


def export_frame(fa: FrameAtoms, path) -> None:
    """MatrixMarket atoms plus a ``<stem>.index.json`` sidecar."""
    side = {
        "n": fa.n,
        "m": fa.m,
        "level": fa.level.tolist(),
        "node": fa.node.tolist(),
        "kind": [KIND_NAMES[x] for x in fa.kind.tolist()],
        "position": fa.position.tolist(),
        "supports": {f"{j}:{k}": np.asarray(s).tolist() for (j, k), s in fa.supports.items()},
        "config": fa.config,
    }
    write_mm_coordinate(fa.atoms, path)
    with atomic_write(index_path(path)) as fh:
        json.dump(side, fh)
        fh.write("\n")


def import_frame(path) -> FrameAtoms:
    side_path = index_path(path)
    try:
        with open(side_path) as fh:
            side = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{side_path} line {exc.lineno}") from exc
    except FileNotFoundError:
        raise ParseError("missing index sidecar", str(side_path)) from None
    atoms = read_mm(path)
    if not sp.issparse(atoms):
        raise ParseError("frame atoms must be MatrixMarket coordinate data", str(path))
    try:
        n, m = int(side["n"]), int(side["m"])
        level = np.asarray(side["level"], dtype=np.int64)
        node = np.asarray(side["node"], dtype=np.int64)
        kind = np.asarray([KIND_NAMES.index(x) for x in side["kind"]], dtype=np.int64)
        position = np.asarray(side["position"], dtype=np.int64)
        supports = {tuple(int(x) for x in key.split(":")): np.asarray(v, dtype=np.int64)
                    for key, v in side["supports"].items()}
        config = side.get("config", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad index sidecar: {exc}", str(side_path)) from exc
    if atoms.shape != (m, n):
        raise ParseError(f"atoms are {atoms.shape}, index says {(m, n)}", str(path))
    try:
        return FrameAtoms(n, atoms.tocsr(), level, node, kind, position, supports, config)
    except InputError as exc:
        raise ParseError(str(exc), str(path)) from exc
