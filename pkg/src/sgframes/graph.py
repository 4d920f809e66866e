"""Weighted undirected graphs, Laplacian spectra and spanning trees.

Vertices are 0-based everywhere in the library. Edges are stored once per
unordered pair, canonicalized so that ``u < v`` and sorted by ``(u, v)``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConnectivityError, InputError, NumericalError

SIGN_EPS = 1e-12
ORTHO_TOL = 1e-10


class Graph:
    """Weighted undirected graph on vertices ``0..n-1``.

    Parameters
    ----------
    n : int
        Number of vertices (positive).
    edges : iterable of (u, v, w)
        Undirected edges with ``u != v`` and ``w > 0``. Each unordered pair
        may appear at most once.
    """

    __slots__ = ("n", "u", "v", "w")

    def __init__(self, n: int, edges: Iterable[Sequence[float]] = ()):
        edges = list(edges)
        if edges:
            arr = np.asarray(edges, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 3:
                raise InputError("edges must be (u, v, w) triples")
            u, v, w = arr[:, 0], arr[:, 1], arr[:, 2]
            if np.any(u != np.round(u)) or np.any(v != np.round(v)):
                raise InputError("vertex indices must be integers")
            u, v = u.astype(np.int64), v.astype(np.int64)
        else:
            u = v = np.zeros(0, dtype=np.int64)
            w = np.zeros(0)
        self._init(n, u, v, w, check=True)

    @classmethod
    def from_arrays(cls, n, u, v, w, check=True) -> "Graph":
        g = cls.__new__(cls)
        g._init(n, np.asarray(u, dtype=np.int64), np.asarray(v, dtype=np.int64),
                np.asarray(w, dtype=float), check=check)
        return g

    def _init(self, n, u, v, w, check):
        n = int(n)
        if n < 1:
            raise InputError(f"vertex count must be positive, got {n}")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        if check:
            if lo.size and (lo.min() < 0 or hi.max() >= n):
                raise InputError(f"vertex index out of range [0, {n})")
            if np.any(lo == hi):
                raise InputError("self-loops are not allowed")
            if np.any(~np.isfinite(w)) or np.any(w <= 0):
                raise InputError("edge weights must be finite and strictly positive")
        order = np.lexsort((hi, lo))
        lo, hi, w = lo[order], hi[order], w[order]
        if check and lo.size > 1:
            dup = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
            if np.any(dup):
                i = int(np.argmax(dup))
                raise InputError(f"duplicate edge ({lo[i]}, {hi[i]})")
        for arr in (lo, hi, w):
            arr.setflags(write=False)
        self.n, self.u, self.v, self.w = n, lo, hi, w

    @property
    def num_edges(self) -> int:
        return int(self.u.size)

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(a), int(b), float(c)) for a, b, c in zip(self.u, self.v, self.w)]

    def edge_set(self) -> frozenset:
        return frozenset(zip(self.u.tolist(), self.v.tolist()))

    def total_weight(self) -> float:
        return float(self.w.sum())

    def weight_matrix(self) -> sp.csr_matrix:
        """Symmetric sparse weight matrix W."""
        rows = np.concatenate([self.u, self.v])
        cols = np.concatenate([self.v, self.u])
        vals = np.concatenate([self.w, self.w])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in zip(self.u.tolist(), self.v.tolist()):
            adj[a].append(b)
            adj[b].append(a)
        return adj

    def is_tree(self) -> bool:
        return self.num_edges == self.n - 1 and is_connected(self)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.u, other.u)
                and np.array_equal(self.v, other.v) and np.array_equal(self.w, other.w))

    __hash__ = None

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.num_edges})"


def path_graph(n: int, weight: float = 1.0) -> Graph:
    return Graph(n, [(i, i + 1, weight) for i in range(n - 1)])


def cycle_graph(n: int, weight: float = 1.0) -> Graph:
    if n < 3:
        raise InputError("a cycle needs at least 3 vertices")
    return Graph(n, [(i, (i + 1) % n, weight) for i in range(n)])


def complete_graph(n: int, weight: float = 1.0) -> Graph:
    return Graph(n, [(i, j, weight) for i in range(n) for j in range(i + 1, n)])


def grid_graph(rows: int, cols: int, weight: float = 1.0) -> Graph:
    """4-neighbour lattice, vertex ``r * cols + c``."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1, weight))
            if r + 1 < rows:
                edges.append((i, i + cols, weight))
    return Graph(rows * cols, edges)


def laplacian(g: Graph, sparse: bool = False):
    """Unnormalized Laplacian ``D - W`` (dense unless ``sparse``)."""
    W = g.weight_matrix()
    deg = np.asarray(W.sum(axis=1)).ravel()
    L = sp.diags(deg) - W
    if sparse:
        return L.tocsr()
    return L.toarray()


@dataclass(frozen=True)
class LaplacianSpectrum:
    """Ascending eigenvalues; ``eigenvectors[i]`` belongs to ``eigenvalues[i]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def fix_signs(rows: np.ndarray) -> np.ndarray:
    """Flip rows so that their first entry above ``SIGN_EPS`` in magnitude is positive."""
    rows = np.array(rows, dtype=float, copy=True)
    significant = np.abs(rows) > SIGN_EPS
    first = np.argmax(significant, axis=1)
    lead = rows[np.arange(rows.shape[0]), first]
    flip = significant.any(axis=1) & (lead < 0)
    rows[flip] *= -1.0
    return rows


def spectrum(g: Graph, tol: float = 1e-9) -> LaplacianSpectrum:
    """Full eigendecomposition of the Laplacian of ``g``.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero; anything more negative
    is reported as a numerical failure. Eigenvectors are returned as rows with
    the sign convention of :func:`fix_signs`.
    """
    L = laplacian(g)
    try:
        lam, U = np.linalg.eigh(L)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    scale = max(1.0, float(np.abs(lam).max(initial=0.0)))
    if lam[0] < -tol * scale:
        raise NumericalError(f"Laplacian has negative eigenvalue {lam[0]:.3e}")
    lam = np.maximum(lam, 0.0)
    vecs = fix_signs(U.T)
    lam.setflags(write=False)
    vecs.setflags(write=False)
    return LaplacianSpectrum(lam, vecs)


def induced_subgraph(g: Graph, subset: Sequence[int]) -> Graph:
    """Restriction of ``g`` to ``subset``; vertex ``subset[i]`` becomes ``i``."""
    subset = np.asarray(subset, dtype=np.int64).ravel()
    if subset.size == 0:
        raise InputError("subset must be nonempty")
    if subset.min() < 0 or subset.max() >= g.n:
        raise InputError(f"subset index out of range [0, {g.n})")
    if np.unique(subset).size != subset.size:
        raise InputError("subset contains duplicated vertices")
    relabel = np.full(g.n, -1, dtype=np.int64)
    relabel[subset] = np.arange(subset.size)
    a, b = relabel[g.u], relabel[g.v]
    keep = (a >= 0) & (b >= 0)
    return Graph.from_arrays(subset.size, a[keep], b[keep], g.w[keep], check=False)


def is_connected(g: Graph) -> bool:
    if g.n == 1:
        return True
    if g.num_edges < g.n - 1:
        return False
    ncomp, _ = connected_components(g.weight_matrix(), directed=False)
    return ncomp == 1


class _DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def minimum_spanning_tree(g: Graph, maximum: bool = False) -> Graph:
    """Kruskal spanning tree with ties broken by ``(w, u, v)``.

    With ``maximum=True`` the weight key is negated, giving a maximum
    spanning tree under the same ``(u, v)`` tie-break.
    """
    if not is_connected(g):
        raise ConnectivityError("minimum_spanning_tree needs a connected graph")
    key = -g.w if maximum else g.w
    order = np.lexsort((g.v, g.u, key))
    ds = _DisjointSet(g.n)
    keep = []
    u, v = g.u.tolist(), g.v.tolist()
    for e in order.tolist():
        if ds.union(u[e], v[e]):
            keep.append(e)
            if len(keep) == g.n - 1:
                break
    keep = np.asarray(keep, dtype=np.int64)
    return Graph.from_arrays(g.n, g.u[keep], g.v[keep], g.w[keep], check=False)


@dataclass(frozen=True)
class SpanningTreeFamily:
    """Input graph, its MST and the one-edge-swap trees, deduplicated.

    ``base`` is the index of the member equal to the input graph, or ``None``
    when the input is itself a tree (the family then has a single member).
    """

    members: tuple
    base: Optional[int]

    def __len__(self):
        return len(self.members)


def _rooted(tree: Graph, root: int = 0):
    adj = tree.neighbors()
    parent = [-1] * tree.n
    depth = [0] * tree.n
    seen = [False] * tree.n
    seen[root] = True
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if not seen[y]:
                seen[y] = True
                parent[y] = x
                depth[y] = depth[x] + 1
                queue.append(y)
    return parent, depth


def spanning_tree_family(g: Graph, maximum: bool = False) -> SpanningTreeFamily:
    """Collect ``g``, its MST and one swapped tree per non-tree edge.

    The MST is rooted at vertex 0. For a non-tree edge ``(a, b)`` the swapped
    tree adds ``(a, b)`` and drops the parent edge of the deeper endpoint
    (the larger index on equal depth); that parent edge always lies on the
    cycle closed by ``(a, b)``.
    """
    mst = minimum_spanning_tree(g, maximum=maximum)
    if g.num_edges == g.n - 1:
        return SpanningTreeFamily((g,), None)
    parent, depth = _rooted(mst)
    weight = {(a, b): c for a, b, c in mst.edges}
    in_tree = set(weight)
    members = [g, mst]
    seen = {g.edge_set(), mst.edge_set()}
    for a, b, c in g.edges:
        if (a, b) in in_tree:
            continue
        x = a if (depth[a], a) > (depth[b], b) else b
        drop = (min(x, parent[x]), max(x, parent[x]))
        edges = {e: wt for e, wt in weight.items() if e != drop}
        edges[(a, b)] = c
        tree = Graph(g.n, [(p, q, wt) for (p, q), wt in edges.items()])
        key = tree.edge_set()
        if key not in seen:
            seen.add(key)
            members.append(tree)
    return SpanningTreeFamily(tuple(members), 0)
