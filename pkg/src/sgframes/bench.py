"""Test signals, best-K-term approximation and benchmark runs.

The benchmark protocol is our own: relative l2 error of hard thresholding
the canonical frame coefficients, over a grid of K values.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .errors import ConfigurationError, InputError
from .filterbanks import make_filterbanks
from .frame import FrameAtoms, build_frame
from .graph import Graph, laplacian, spectrum
from .io import atomic_write, read_graph
from .partition import PartitionTree, build_partition_tree
from .transforms import TransformPlan, analyze

log = logging.getLogger(__name__)

SIGNAL_KINDS = ("piecewise-constant", "bandlimited", "path")
CSV_HEADER = ["graph", "variant", "signal", "seed", "K", "m", "rel_error", "analyze_ms", "build_ms"]
TIMING_HEADER = ["graph", "variant", "build_tree_ms", "build_frame_ms", "analyze_ms"]


# -- random graphs -------------------------------------------------------------

def random_connected_graph(n: int, seed, extra: Optional[int] = None,
                           weights=(0.1, 1.0)) -> Graph:
    """Random recursive tree plus ``extra`` random chords, uniform weights."""
    rng = np.random.default_rng(seed)
    pairs = {}
    for i in range(1, n):
        j = int(rng.integers(0, i))
        pairs[(j, i)] = None
    if extra is None:
        extra = n
    for _ in range(extra):
        a, b = (int(x) for x in rng.integers(0, n, 2))
        if a != b:
            pairs.setdefault((min(a, b), max(a, b)), None)
    w = rng.uniform(weights[0], weights[1], size=len(pairs))
    return Graph(n, [(a, b, float(x)) for (a, b), x in zip(pairs, w)])


def random_regular_graph(n: int, degree: int, seed) -> Graph:
    import networkx as nx

    nxg = nx.random_regular_graph(degree, n, seed=seed)
    edges = np.array(nxg.edges(), dtype=np.int64).reshape(-1, 2)
    return Graph.from_arrays(n, edges[:, 0], edges[:, 1], np.ones(len(edges)))


# -- signals -------------------------------------------------------------------

def _lowest_eigenvectors(g: Graph, count: int) -> np.ndarray:
    if g.n <= 2000 or count >= g.n - 1:
        return spectrum(g).eigenvectors[:count]
    L = laplacian(g, sparse=True)
    vals, vecs = spla.eigsh(L, k=count, sigma=-1e-3, which="LM")
    return vecs[:, np.argsort(vals)].T


def gen_signal(t: PartitionTree, kind: str, seed, n_eig: int = 5,
               snr_db: Optional[float] = None) -> np.ndarray:
    """Deterministic test signal on the vertices of ``t.original``.

    ``piecewise-constant``: one random value per cluster at level ceil(J/2).
    ``bandlimited``: random mix of the ``n_eig`` lowest Laplacian eigenvectors.
    ``path``: indicator of a hop-count shortest path between two random
    vertices of the same component. ``snr_db`` adds white noise.
    """
    if kind not in SIGNAL_KINDS:
        raise InputError(f"unknown signal kind {kind!r}; expected one of {SIGNAL_KINDS}")
    rng = np.random.default_rng(seed)
    g = t.original
    n = g.n
    if kind == "piecewise-constant":
        level = t.levels[math.ceil(t.J / 2)]
        f = np.empty(n)
        for node, value in zip(level, rng.normal(size=len(level))):
            f[node.members] = value
    elif kind == "bandlimited":
        count = min(n_eig, n)
        U = _lowest_eigenvectors(g, count)
        f = rng.normal(size=count) @ U
    else:
        W = g.weight_matrix()
        _, labels = connected_components(W, directed=False)
        a = int(rng.integers(0, n))
        same = np.flatnonzero(labels == labels[a])
        b = int(same[rng.integers(0, same.size)])
        _, pred = breadth_first_order(W, a, directed=False, return_predecessors=True)
        f = np.zeros(n)
        x = b
        while x != a:
            f[x] = 1.0
            x = pred[x]
        f[a] = 1.0
    if snr_db is not None:
        power = float(np.mean(f ** 2))
        sigma = math.sqrt(power / 10 ** (snr_db / 10)) if power > 0 else 0.0
        f = f + rng.normal(scale=sigma, size=n)
    return f


# -- non-linear approximation ----------------------------------------------------

@dataclass(frozen=True)
class ApproxResult:
    K: int
    relative_error: float
    variant: str
    m: int
    wall_time: float


RECONSTRUCTIONS = ("projection", "synthesis")


def best_k_indices(coefs: np.ndarray, K: int) -> np.ndarray:
    """Indices of the ``K`` largest magnitudes, ties to the lower index."""
    order = np.argsort(-np.abs(coefs), kind="stable")
    return order[:K]


class _Projector:
    """Incremental projection of ``f`` onto the span of added atoms.

    Modified Gram-Schmidt with one re-orthogonalization pass; atoms that are
    numerically dependent on the current basis are skipped.
    """

    def __init__(self, f: np.ndarray, dep_tol: float = 1e-10):
        self.f = f
        self.basis: list[np.ndarray] = []
        self.residual = f.copy()
        self.dep_tol = dep_tol

    def add(self, atom: np.ndarray) -> None:
        norm0 = np.linalg.norm(atom)
        if norm0 == 0:
            return
        q = atom / norm0
        for _ in range(2):
            for b in self.basis:
                q -= (b @ q) * b
        norm = np.linalg.norm(q)
        if norm <= self.dep_tol:
            return
        q /= norm
        self.basis.append(q)
        self.residual -= (q @ self.residual) * q

    def approximation(self) -> np.ndarray:
        return self.f - self.residual


def _relative(f, fk) -> float:
    norm = np.linalg.norm(f)
    return float(np.linalg.norm(f - fk) / norm) if norm > 0 else 0.0


def nl_approx(f, fa: FrameAtoms, K: int, coefs: Optional[np.ndarray] = None,
              reconstruction: str = "projection"):
    """Best-K-term approximation of ``f`` in the frame ``fa``.

    The ``K`` atoms with the largest ``|<f, atom>|`` are selected. With
    ``reconstruction="projection"`` (default) ``f`` is projected orthogonally
    onto their span; ``"synthesis"`` instead sums the kept canonical terms,
    ``atoms.T @ thresholded``. Both coincide when the frame is an orthonormal
    basis; only the projection makes the error nonincreasing in ``K`` for
    redundant frames.
    """
    start = time.perf_counter()
    f = np.asarray(f, dtype=float).ravel()
    if f.size != fa.n:
        raise InputError(f"signal has length {f.size}, frame expects {fa.n}")
    if not 0 <= K <= fa.m:
        raise InputError(f"K must lie in [0, {fa.m}], got {K}")
    if reconstruction not in RECONSTRUCTIONS:
        raise InputError(f"unknown reconstruction {reconstruction!r}")
    if coefs is None:
        coefs = fa.atoms @ f
    idx = best_k_indices(coefs, K)
    if reconstruction == "synthesis" or fa.m == fa.n:
        kept = np.zeros_like(coefs)
        kept[idx] = coefs[idx]
        fk = fa.atoms.T @ kept
    else:
        proj = _Projector(f)
        for row in fa.atoms[idx].toarray():
            proj.add(row)
        fk = proj.approximation()
    variant = fa.config.get("variant", "")
    return fk, ApproxResult(K, _relative(f, fk), str(variant), fa.m, time.perf_counter() - start)


def error_curve(f, fa: FrameAtoms, Ks, reconstruction: str = "projection",
                coefs: Optional[np.ndarray] = None) -> list[ApproxResult]:
    """``nl_approx`` results for every ``K`` in ``Ks``, sharing one projection sweep."""
    f = np.asarray(f, dtype=float).ravel()
    if coefs is None:
        coefs = fa.atoms @ f
    Ks = [int(K) for K in Ks]
    if reconstruction == "synthesis" or fa.m == fa.n or not Ks:
        return [nl_approx(f, fa, K, coefs, reconstruction)[1] for K in Ks]
    for K in Ks:
        if not 0 <= K <= fa.m:
            raise InputError(f"K must lie in [0, {fa.m}], got {K}")
    variant = str(fa.config.get("variant", ""))
    order = best_k_indices(coefs, max(Ks))
    rows = fa.atoms[order]
    proj = _Projector(f)
    errors = {}
    start = time.perf_counter()
    for step in range(max(Ks) + 1):
        if step:
            proj.add(rows[step - 1].toarray().ravel())
        errors[step] = (_relative(f, proj.approximation()), time.perf_counter() - start)
    return [ApproxResult(K, errors[K][0], variant, fa.m, errors[K][1]) for K in Ks]


# -- benchmark runner ------------------------------------------------------------

def _load_graph(entry: dict, base: Path) -> Graph:
    if "path" in entry:
        return read_graph(base / entry["path"])
    gen = entry.get("random")
    if gen is None:
        raise ConfigurationError(f"graph {entry.get('name')!r} needs 'path' or 'random'")
    kind = gen.get("kind", "connected")
    if kind == "connected":
        return random_connected_graph(int(gen["n"]), gen.get("seed", 0), gen.get("extra"))
    if kind == "regular":
        return random_regular_graph(int(gen["n"]), int(gen.get("degree", 4)), gen.get("seed", 0))
    raise ConfigurationError(f"unknown random graph kind {kind!r}")


def _resolve_K(entries, m: int) -> list[int]:
    out = []
    for K in entries:
        if K == "m":
            out.append(m)
        elif isinstance(K, float) and 0 <= K <= 1 and not float(K).is_integer():
            out.append(int(round(K * m)))
        else:
            out.append(int(K))
    return out


def _fmt_float(x: float) -> str:
    return repr(float(x))


def run_benchmark(config: dict, base_dir=".", workers: int = 1):
    """Run every (graph, variant, signal, seed, K) combination.

    Returns ``(rows_csv, timings_csv)`` as strings. Timing columns are left
    empty when ``config["timing"]`` is false, which makes the output
    byte-reproducible.
    """
    base = Path(base_dir)
    variants = config.get("variants", ["haar"])
    signals = config.get("signals", ["piecewise-constant"])
    seeds = config.get("seeds", [0])
    K_grid = config.get("K", [0, "m"])
    branching = int(config.get("branching", 2))
    r = config.get("r", 1)
    timing = bool(config.get("timing", True))
    snr = config.get("snr_db")
    reconstruction = config.get("reconstruction", "projection")
    connected = bool(config.get("connected", True))

    jobs = []
    for gspec in config.get("graphs", []):
        for variant in variants:
            jobs.append((gspec, variant))

    def run(job):
        gspec, variant = job
        name = gspec.get("name", gspec.get("path", "graph"))
        g = _load_graph(gspec, base)
        t0 = time.perf_counter()
        tree = build_partition_tree(g, branching, connected_clusters=connected)
        t1 = time.perf_counter()
        banks = make_filterbanks(tree, variant, r if variant == "eigen" else None)
        fa = build_frame(tree, banks)
        t2 = time.perf_counter()
        plan = TransformPlan(tree, banks)
        rows = []
        analyze_total = 0.0
        for kind in signals:
            for seed in seeds:
                f = gen_signal(tree, kind, seed, snr_db=snr)
                ta = time.perf_counter()
                coefs = analyze(f, tree, banks, plan).flatten()
                analyze_s = time.perf_counter() - ta
                analyze_total += analyze_s
                for res in error_curve(f, fa, _resolve_K(K_grid, fa.m), reconstruction, coefs):
                    rows.append([name, variant, kind, str(seed), str(res.K), str(fa.m),
                                 _fmt_float(res.relative_error),
                                 f"{analyze_s * 1e3:.3f}" if timing else "",
                                 f"{(t2 - t0) * 1e3:.3f}" if timing else ""])
        timing_row = [name, variant,
                      f"{(t1 - t0) * 1e3:.3f}" if timing else "",
                      f"{(t2 - t1) * 1e3:.3f}" if timing else "",
                      f"{analyze_total * 1e3:.3f}" if timing else ""]
        return rows, timing_row

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    out, tim = io.StringIO(), io.StringIO()
    w1 = csv.writer(out, lineterminator="\n")
    w2 = csv.writer(tim, lineterminator="\n")
    w1.writerow(CSV_HEADER)
    w2.writerow(TIMING_HEADER)
    for rows, timing_row in results:
        w1.writerows(rows)
        w2.writerow(timing_row)
    return out.getvalue(), tim.getvalue()


def run_benchmark_file(config_path, output_path, workers: int = 1,
                       plot_dir=None) -> None:
    """Run a JSON config and write ``output_path`` plus ``<stem>.timing.csv``."""
    config_path = Path(config_path)
    with open(config_path) as fh:
        config = json.load(fh)
    rows, timings = run_benchmark(config, config_path.parent, workers)
    output_path = Path(output_path)
    with atomic_write(output_path) as fh:
        fh.write(rows)
    with atomic_write(output_path.with_name(output_path.stem + ".timing.csv")) as fh:
        fh.write(timings)
    if plot_dir is not None:
        write_plot_data(rows, plot_dir)


def write_plot_data(rows_csv: str, directory) -> list[Path]:
    """Two-column ``K rel_error`` files, one per (graph, variant, signal, seed)."""
    curves: dict = {}
    for row in csv.DictReader(io.StringIO(rows_csv)):
        key = (row["graph"], row["variant"], row["signal"], row["seed"])
        curves.setdefault(key, []).append((int(row["K"]), row["rel_error"]))
    directory = Path(directory)
    written = []
    for key, points in curves.items():
        path = directory / ("_".join(key).replace("/", "-") + ".dat")
        with atomic_write(path) as fh:
            for K, err in sorted(points):
                fh.write(f"{K} {err}\n")
        written.append(path)
    return written


# -- runtime scaling -------------------------------------------------------------

def analyze_scaling(sizes=(1000, 10000, 100000), degree: int = 4, seed: int = 0,
                    repeats: int = 3):
    """Best-of-``repeats`` Haar analyze time on random regular graphs.

    Returns ``(sizes, seconds, slope)`` with the least-squares log-log slope.
    """
    seconds = []
    for n in sizes:
        g = random_regular_graph(n, degree, seed)
        tree = build_partition_tree(g, 2)
        banks = make_filterbanks(tree, "haar")
        f = np.random.default_rng(seed).normal(size=n)
        best = math.inf
        for _ in range(repeats):
            start = time.perf_counter()
            analyze(f, tree, banks)
            best = min(best, time.perf_counter() - start)
        seconds.append(best)
        log.info("n=%d analyze %.3fs", n, best)
    slope = float(np.polyfit(np.log(sizes), np.log(seconds), 1)[0])
    return list(sizes), seconds, slope
