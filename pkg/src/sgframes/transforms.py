"""Fast analysis and synthesis on coefficient trees, plus dense equivalents.

Every node of level ``j`` carries ``R[j]`` low-pass coefficients, so the
low-pass coefficients of a whole level form a ``level size x R[j]`` matrix
whose row ``k`` belongs to node ``(j, k)``. At a node the children's rows are
stacked into a ``children x R[j+1]`` matrix ``X``; the node's low-pass vector
is ``A @ X`` and its high-pass vector ``B @ X``, both flattened row by row.
"""

from __future__ import annotations

import json
import struct
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InputError, ParseError
from .frame import FrameAtoms, _rj_products
from .io import atomic_write
from .partition import PartitionTree

MAGIC = b"SGFC"
VERSION = 1
_HEADER = struct.Struct("<4sIQ")


@dataclass
class _Group:
    nodes: np.ndarray      # node indices at level j
    children: np.ndarray   # g x c indices into level j+1
    A: np.ndarray          # r x c (shared) or g x r x c
    B: np.ndarray          # mb x c (shared) or g x mb x c


class TransformPlan:
    """Nodes of each level batched by filter shape."""

    def __init__(self, t: PartitionTree, banks: dict):
        self.J = t.J
        self.sizes = t.level_sizes()
        r_levels = []
        self.levels = []
        for j in range(t.J):
            buckets = defaultdict(list)
            rs = set()
            for node in t.levels[j]:
                fp = banks.get((j, node.index))
                if fp is None:
                    raise InputError(f"no filter pair for node ({j}, {node.index})")
                if fp.c != len(node.children):
                    raise InputError(f"filter pair at ({j}, {node.index}) does not match its children")
                rs.add(fp.r)
                buckets[(fp.c, fp.r, fp.m)].append((node.index, node.children, fp))
            if len(rs) != 1:
                raise InputError(f"level {j} mixes low-pass sizes {sorted(rs)}")
            r_levels.append(rs.pop())
            groups = []
            for key in sorted(buckets):
                items = buckets[key]
                nodes = np.fromiter((k for k, _, _ in items), dtype=np.int64, count=len(items))
                kids = np.array([ch for _, ch, _ in items], dtype=np.int64)
                first = items[0][2]
                if all(fp.A is first.A and fp.B is first.B for _, _, fp in items):
                    A, B = first.A, first.B
                else:
                    A = np.stack([fp.A for _, _, fp in items])
                    B = np.stack([fp.B for _, _, fp in items])
                groups.append(_Group(nodes, kids, A, B))
            self.levels.append(groups)
        self.r = r_levels
        self.R = _rj_products(r_levels)
        self.block_sizes = {}
        for j in range(t.J):
            for node in t.levels[j]:
                self.block_sizes[(j, node.index)] = banks[(j, node.index)].m * self.R[j + 1]
        self.m = self.R[0] + sum(self.block_sizes.values())


@dataclass
class CoefficientTree:
    """Low-pass coefficients per level and high-pass vectors per node.

    ``c[j]`` has one row per level-``j`` node holding its low-pass vector;
    entries for ``j > 0`` may be ``None`` when the tree was rebuilt from a
    flat vector or a file, since synthesis needs only ``c[0]``.
    ``d[(j, k)]`` has ``B.shape[0] * R[j + 1]`` entries.
    """

    c: list
    d: dict
    R: list

    @property
    def J(self) -> int:
        return len(self.c) - 1

    def flatten(self) -> np.ndarray:
        """Coefficients in frame-atom order: ``c[0]`` then every ``d`` by level and node."""
        keys = sorted(self.d)
        parts = [np.asarray(self.c[0], dtype=float).ravel()] + [self.d[key] for key in keys]
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, vec, t: PartitionTree, banks: dict, plan: Optional[TransformPlan] = None):
        plan = plan or TransformPlan(t, banks)
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.size != plan.m:
            raise InputError(f"expected {plan.m} coefficients, got {vec.size}")
        c = [vec[:plan.R[0]].reshape(1, plan.R[0]).copy()] + [None] * t.J
        d = {}
        pos = plan.R[0]
        for key in sorted(plan.block_sizes):
            size = plan.block_sizes[key]
            d[key] = vec[pos:pos + size].copy()
            pos += size
        return cls(c, d, list(plan.R))


def analyze(f, t: PartitionTree, banks: dict, plan: Optional[TransformPlan] = None) -> CoefficientTree:
    """Bottom-up fast analysis transform."""
    f = np.asarray(f, dtype=float).ravel()
    if f.size != t.n:
        raise InputError(f"signal has length {f.size}, graph has {t.n} vertices")
    plan = plan or TransformPlan(t, banks)
    R = plan.R
    c = [None] * (t.J + 1)
    c[t.J] = f.reshape(-1, 1).copy()
    d = {}
    for j in range(t.J - 1, -1, -1):
        below = c[j + 1]
        cur = np.empty((plan.sizes[j], R[j]))
        for grp in plan.levels[j]:
            X = below[grp.children]                       # groups x children x R[j+1]
            g = X.shape[0]
            cur[grp.nodes] = np.matmul(grp.A, X).reshape(g, -1)
            high = np.matmul(grp.B, X).reshape(g, -1)
            for k, row in zip(grp.nodes.tolist(), high):
                d[(j, k)] = row
        c[j] = cur
    return CoefficientTree(c, d, list(R))


def synthesize(coef: CoefficientTree, t: PartitionTree, banks: dict,
               plan: Optional[TransformPlan] = None) -> np.ndarray:
    """Top-down adjoint sweep reconstructing the signal from ``c[0]`` and all ``d``."""
    plan = plan or TransformPlan(t, banks)
    R = plan.R
    top = np.asarray(coef.c[0], dtype=float)
    if top.shape != (1, R[0]):
        raise InputError(f"level-0 coefficients must have shape (1, {R[0]}), got {top.shape}")
    missing = set(plan.block_sizes) - set(coef.d)
    if missing:
        raise InputError(f"missing high-pass coefficients for nodes {sorted(missing)[:5]}")
    cur = top
    for j in range(t.J):
        nxt = np.zeros((plan.sizes[j + 1], R[j + 1]))
        for grp in plan.levels[j]:
            g = grp.nodes.size
            low = cur[grp.nodes].reshape(g, -1, R[j + 1])
            try:
                high = np.stack([coef.d[(j, k)] for k in grp.nodes.tolist()]).reshape(g, -1, R[j + 1])
            except ValueError as exc:
                raise InputError(f"level {j}: high-pass vector has the wrong length") from exc
            At = np.swapaxes(grp.A, -1, -2)
            Bt = np.swapaxes(grp.B, -1, -2)
            nxt[grp.children] = np.matmul(At, low) + np.matmul(Bt, high)
        cur = nxt
    return cur[:, 0].copy()


def analyze_dense(f, fa: FrameAtoms) -> np.ndarray:
    f = np.asarray(f, dtype=float).ravel()
    if f.size != fa.n:
        raise InputError(f"signal has length {f.size}, frame expects {fa.n}")
    return fa.atoms @ f


def synthesize_dense(coefs, fa: FrameAtoms) -> np.ndarray:
    coefs = np.asarray(coefs, dtype=float).ravel()
    if coefs.size != fa.m:
        raise InputError(f"expected {fa.m} coefficients, got {coefs.size}")
    return fa.atoms.T @ coefs


# -- coefficient files ---------------------------------------------------------

def save_coefficients(coef: CoefficientTree, path) -> None:
    """JSON by default; ``.bin`` suffix selects the flat little-endian format."""
    if str(path).endswith(".bin"):
        flat = coef.flatten()
        with atomic_write(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, VERSION, flat.size))
            fh.write(flat.astype("<f8").tobytes())
        return
    data = {
        "J": coef.J,
        "R": list(coef.R),
        "c0": np.asarray(coef.c[0]).ravel().tolist(),
        "d": {f"{j}:{k}": coef.d[(j, k)].tolist() for j, k in sorted(coef.d)},
    }
    with atomic_write(path) as fh:
        json.dump(data, fh)
        fh.write("\n")


def read_flat_binary(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ParseError("file shorter than header", str(path))
    magic, version, m = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ParseError("bad magic", str(path))
    if version != VERSION:
        raise ParseError(f"unsupported version {version}", str(path))
    if len(raw) != _HEADER.size + 8 * m:
        raise ParseError(f"expected {m} values", str(path))
    return np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(float)


def load_coefficients(path, t: PartitionTree, banks: dict) -> CoefficientTree:
    plan = TransformPlan(t, banks)
    if str(path).endswith(".bin"):
        return CoefficientTree.from_flat(read_flat_binary(path), t, banks, plan)
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    try:
        c0 = np.asarray(data["c0"], dtype=float).reshape(1, -1)
        d = {}
        for key, values in data["d"].items():
            j, k = (int(x) for x in key.split(":"))
            d[(j, k)] = np.asarray(values, dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed coefficient file: {exc}", str(path)) from exc
    if c0.shape[1] != plan.R[0]:
        raise ParseError(f"c0 has {c0.shape[1]} entries, expected {plan.R[0]}", "c0")
    if set(d) != set(plan.block_sizes):
        raise ParseError("node keys do not match the partition tree", "d")
    for key, vec in d.items():
        if vec.size != plan.block_sizes[key]:
            raise ParseError(f"expected {plan.block_sizes[key]} values", f"d[{key[0]}:{key[1]}]")
    return CoefficientTree([c0] + [None] * t.J, d, list(plan.R))
