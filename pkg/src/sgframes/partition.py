"""Multi-graph partition trees.

A tree has levels ``0..J``. Level ``J`` holds one singleton cluster per
vertex (node ``k`` is vertex ``k``), level 0 holds the single root. Every
level ``j`` carries a coarse graph whose vertices are the level-``j``
clusters; the finest coarse graph is the input graph itself.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, ParseError
from .graph import Graph, induced_subgraph, is_connected
from .io import atomic_write


@dataclass(frozen=True, eq=False)
class ClusterNode:
    level: int
    index: int
    members: np.ndarray
    children: tuple = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(eq=False)
class PartitionTree:
    levels: list
    coarse_graphs: list
    connected_clusters: bool = False

    @property
    def J(self) -> int:
        return len(self.levels) - 1

    @property
    def original(self) -> Graph:
        return self.coarse_graphs[-1]

    @property
    def n(self) -> int:
        return self.original.n

    def node(self, j: int, k: int) -> ClusterNode:
        return self.levels[j][k]

    def level_sizes(self) -> list[int]:
        return [len(level) for level in self.levels]

    def internal_nodes(self):
        """Yield every non-leaf node, level 0 first."""
        for level in self.levels[:-1]:
            yield from level


@dataclass(frozen=True)
class SubgraphView:
    node: tuple
    graph: Graph


def _check_partition(n: int, partition) -> np.ndarray:
    labels = np.full(n, -1, dtype=np.int64)
    for b, block in enumerate(partition):
        block = np.asarray(block, dtype=np.int64)
        if block.size == 0:
            raise InputError(f"partition block {b} is empty")
        if block.min() < 0 or block.max() >= n:
            raise InputError(f"partition block {b} has an out-of-range vertex")
        if np.any(labels[block] >= 0) or np.unique(block).size != block.size:
            raise InputError(f"partition block {b} overlaps another block")
        labels[block] = b
    if np.any(labels < 0):
        raise InputError("partition does not cover every vertex")
    return labels


def coarsen_graph(g: Graph, partition: Sequence[Sequence[int]]) -> Graph:
    """Collapse each block to a super-node; cross weights are summed."""
    labels = _check_partition(g.n, partition)
    nb = len(partition)
    a, b = labels[g.u], labels[g.v]
    cross = a != b
    lo = np.minimum(a[cross], b[cross])
    hi = np.maximum(a[cross], b[cross])
    keys, inverse = np.unique(lo * nb + hi, return_inverse=True)
    weights = np.bincount(inverse, weights=g.w[cross], minlength=keys.size)
    return Graph.from_arrays(nb, keys // nb, keys % nb, weights, check=False)


def _group_level(g: Graph, branching: int) -> list[list[int]]:
    """Greedy heavy-edge grouping of the vertices of ``g``.

    Adjacent groups are merged in order of decreasing aggregated cross
    weight (ties to smaller ids) while the merged size stays within
    ``branching``. Leftover singletons are then absorbed by their heaviest
    neighbour, or by the smallest group when they have none.
    """
    k = g.n
    size = [1] * k
    members = [[i] for i in range(k)]
    alive = [True] * k
    adj: list[dict] = [dict() for _ in range(k)]
    for a, b, w in zip(g.u.tolist(), g.v.tolist(), g.w.tolist()):
        adj[a][b] = w
        adj[b][a] = w
    heap = [(-w, a, b) for a, b, w in zip(g.u.tolist(), g.v.tolist(), g.w.tolist())]
    heapq.heapify(heap)

    def merge(a, b):
        keep, gone = min(a, b), max(a, b)
        alive[gone] = False
        size[keep] += size[gone]
        members[keep].extend(members[gone])
        adj[keep].pop(gone, None)
        for x, w in adj[gone].items():
            if x == keep:
                continue
            del adj[x][gone]
            total = adj[keep].get(x, 0.0) + w
            adj[keep][x] = total
            adj[x][keep] = total
            if size[keep] + size[x] <= branching:
                heapq.heappush(heap, (-total, min(keep, x), max(keep, x)))
        adj[gone] = {}
        return keep

    while heap:
        negw, a, b = heapq.heappop(heap)
        if not (alive[a] and alive[b]) or adj[a].get(b) != -negw:
            continue
        if size[a] + size[b] <= branching:
            merge(a, b)

    for s in range(k):
        if not (alive[s] and size[s] == 1):
            continue
        if adj[s]:
            target = min(adj[s].items(), key=lambda item: (-item[1], item[0]))[0]
        else:
            others = [(size[x], x) for x in range(k) if alive[x] and x != s]
            if not others:
                break
            target = min(others)[1]
        merge(s, target)

    groups = [sorted(members[x]) for x in range(k) if alive[x]]
    groups.sort(key=lambda grp: grp[0])
    return groups


def build_partition_tree(g: Graph, target_branching: int = 2,
                         connected_clusters: bool = True) -> PartitionTree:
    """Bottom-up greedy heavy-edge partition tree of ``g``.

    Merges only ever join clusters sharing an edge, except when a singleton
    has no neighbour left; on a connected graph every node's induced
    subgraph is therefore connected.
    """
    if target_branching < 2:
        raise InputError("target_branching must be at least 2")
    graphs = [g]
    groupings = []
    current = g
    while current.n > 1:
        groups = _group_level(current, target_branching)
        groupings.append(groups)
        current = coarsen_graph(current, groups)
        graphs.append(current)
    J = len(groupings)

    leaves = [ClusterNode(J, i, np.array([i], dtype=np.int64)) for i in range(g.n)]
    levels = [leaves]
    for depth, groups in enumerate(groupings):
        j = J - depth - 1
        below = levels[0]
        nodes = []
        for k, children in enumerate(groups):
            members = np.concatenate([below[c].members for c in children])
            nodes.append(ClusterNode(j, k, members, tuple(children)))
        levels.insert(0, nodes)
    for level in levels:
        for node in level:
            node.members.setflags(write=False)
    return PartitionTree(levels, graphs[::-1], connected_clusters)


def subgraph_of(t: PartitionTree, j: int, k: int) -> SubgraphView:
    """Subgraph of the level ``j+1`` coarse graph induced by the children of ``(j, k)``."""
    if not (0 <= j < t.J) or not (0 <= k < len(t.levels[j])):
        raise InputError(f"node ({j}, {k}) is not a non-leaf node")
    node = t.levels[j][k]
    return SubgraphView((j, k), induced_subgraph(t.coarse_graphs[j + 1], node.children))


@dataclass
class ValidationReport:
    """Offending nodes per checked condition; empty list means the check passed."""

    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(not bad for bad in self.checks.values())

    def failures(self) -> dict:
        return {name: bad for name, bad in self.checks.items() if bad}

    def __str__(self):
        lines = []
        for name, bad in self.checks.items():
            status = "ok" if not bad else f"FAIL {bad[:10]}{' ...' if len(bad) > 10 else ''}"
            lines.append(f"{name}: {status}")
        return "\n".join(lines)


def validate_partition_tree(t: PartitionTree,
                            check_connectivity: Optional[bool] = None) -> ValidationReport:
    """Check the partition-tree conditions.

    ``check_connectivity`` defaults to ``t.connected_clusters``.
    """
    if check_connectivity is None:
        check_connectivity = t.connected_clusters
    n = t.n
    J = t.J
    checks = {name: [] for name in (
        "root_is_vertex_set", "leaves_are_singletons", "levels_disjoint",
        "levels_cover", "children_valid", "children_refine_parent",
        "at_least_two_children", "coarse_graph_sizes")}
    if check_connectivity:
        checks["subgraph_connected"] = []

    root = t.levels[0]
    if len(root) != 1 or sorted(np.asarray(root[0].members).tolist()) != list(range(n)):
        checks["root_is_vertex_set"].append((0, 0))
    leaves = t.levels[J]
    if len(leaves) != n:
        checks["leaves_are_singletons"].append((J, None))
    for node in leaves:
        if len(node.members) != 1 or int(node.members[0]) != node.index or node.children:
            checks["leaves_are_singletons"].append((J, node.index))

    for j, level in enumerate(t.levels):
        count = np.zeros(n, dtype=np.int64)
        for node in level:
            mem = np.asarray(node.members, dtype=np.int64)
            if mem.size and (mem.min() < 0 or mem.max() >= n):
                checks["levels_cover"].append((j, node.index))
                continue
            np.add.at(count, mem, 1)
        overlap = np.flatnonzero(count > 1)
        if overlap.size:
            for node in level:
                if np.any(count[np.asarray(node.members, dtype=np.int64)] > 1):
                    checks["levels_disjoint"].append((j, node.index))
        if np.any(count == 0):
            checks["levels_cover"].append((j, None))
        if t.coarse_graphs[j].n != len(level):
            checks["coarse_graph_sizes"].append((j, None))

    for j in range(J):
        parents_of = np.zeros(len(t.levels[j + 1]), dtype=np.int64)
        for node in t.levels[j]:
            kids = node.children
            if any(not (0 <= c < len(t.levels[j + 1])) for c in kids) or len(set(kids)) != len(kids):
                checks["children_valid"].append((j, node.index))
                continue
            parents_of[list(kids)] += 1
            if len(kids) < 2:
                checks["at_least_two_children"].append((j, node.index))
            union = sorted(int(v) for c in kids for v in t.levels[j + 1][c].members)
            if union != sorted(np.asarray(node.members).tolist()):
                checks["children_refine_parent"].append((j, node.index))
            if check_connectivity and len(kids) >= 2:
                sub = induced_subgraph(t.coarse_graphs[j + 1], kids)
                if not is_connected(sub):
                    checks["subgraph_connected"].append((j, node.index))
        for orphan in np.flatnonzero(parents_of != 1):
            checks["children_valid"].append((j + 1, int(orphan)))
    return ValidationReport(checks)


# -- serialization -----------------------------------------------------------

def tree_to_dict(t: PartitionTree) -> dict:
    return {
        "J": t.J,
        "n": t.n,
        "connected_clusters": bool(t.connected_clusters),
        "levels": [[{"k": node.index,
                     "members": np.asarray(node.members).tolist(),
                     "children": list(node.children)} for node in level]
                   for level in t.levels],
        "coarse_graphs": [[[a, b, c] for a, b, c in g.edges] for g in t.coarse_graphs],
    }


def save_tree(t: PartitionTree, path) -> None:
    with atomic_write(path) as fh:
        json.dump(tree_to_dict(t), fh)
        fh.write("\n")


def _int_list(value, where):
    if not isinstance(value, list) or not all(isinstance(x, int) and not isinstance(x, bool)
                                              for x in value):
        raise ParseError("expected a list of integers", where)
    return value


def tree_from_dict(data: dict) -> PartitionTree:
    if not isinstance(data, dict):
        raise ParseError("top level must be an object", "$")
    for key in ("J", "levels", "coarse_graphs"):
        if key not in data:
            raise ParseError(f"missing field {key!r}", "$")
    J = data["J"]
    levels_raw = data["levels"]
    if not isinstance(J, int) or J < 0:
        raise ParseError("J must be a nonnegative integer", "J")
    if not isinstance(levels_raw, list) or len(levels_raw) != J + 1:
        raise ParseError(f"expected {J + 1} levels", "levels")
    if not isinstance(data["coarse_graphs"], list) or len(data["coarse_graphs"]) != J + 1:
        raise ParseError(f"expected {J + 1} coarse graphs", "coarse_graphs")
    n = len(levels_raw[J]) if isinstance(levels_raw[J], list) else 0
    if "n" in data and data["n"] != n:
        raise ParseError(f"n={data['n']} but the leaf level has {n} nodes", "n")
    if n < 1:
        raise ParseError("leaf level is empty", f"levels[{J}]")

    levels = []
    for j, level in enumerate(levels_raw):
        if not isinstance(level, list) or not level:
            raise ParseError("level must be a nonempty list", f"levels[{j}]")
        seen = set()
        nodes = []
        for pos, entry in enumerate(level):
            where = f"levels[{j}][{pos}]"
            if not isinstance(entry, dict):
                raise ParseError("node must be an object", where)
            k = entry.get("k", pos)
            if k != pos:
                raise ParseError(f"k={k} does not match position {pos}", f"{where}.k")
            members = _int_list(entry.get("members"), f"{where}.members")
            children = _int_list(entry.get("children", []), f"{where}.children")
            for v in members:
                if not 0 <= v < n:
                    raise ParseError(f"vertex {v} out of range", f"{where}.members")
                if v in seen:
                    raise ParseError(f"duplicated vertex {v}", f"{where}.members")
                seen.add(v)
            if j < J:
                width = len(levels_raw[j + 1])
                if any(not 0 <= c < width for c in children):
                    raise ParseError("child index out of range", f"{where}.children")
            elif children:
                raise ParseError("leaf nodes cannot have children", f"{where}.children")
            nodes.append(ClusterNode(j, pos, np.asarray(members, dtype=np.int64), tuple(children)))
        levels.append(nodes)

    graphs = []
    for j, edges in enumerate(data["coarse_graphs"]):
        where = f"coarse_graphs[{j}]"
        try:
            graphs.append(Graph(len(levels[j]), edges))
        except (InputError, TypeError, ValueError) as exc:
            raise ParseError(str(exc), where) from exc
    return PartitionTree(levels, graphs, bool(data.get("connected_clusters", False)))


def load_tree(path) -> PartitionTree:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    return tree_from_dict(data)


def trees_equal(a: PartitionTree, b: PartitionTree) -> bool:
    """Field-by-field structural equality."""
    if a.J != b.J or a.connected_clusters != b.connected_clusters:
        return False
    for la, lb in zip(a.levels, b.levels):
        if len(la) != len(lb):
            return False
        for x, y in zip(la, lb):
            if (x.level, x.index, tuple(x.children)) != (y.level, y.index, tuple(y.children)):
                return False
            if not np.array_equal(x.members, y.members):
                return False
    return all(ga == gb for ga, gb in zip(a.coarse_graphs, b.coarse_graphs))
