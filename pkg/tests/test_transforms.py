import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgframes.bench import random_connected_graph
from sgframes.errors import InputError, ParseError
from sgframes.filterbanks import make_filterbanks
from sgframes.frame import build_frame
from sgframes.graph import path_graph
from sgframes.partition import build_partition_tree
from sgframes.transforms import (CoefficientTree, TransformPlan, analyze, analyze_dense,
                                 load_coefficients, read_flat_binary, save_coefficients,
                                 synthesize, synthesize_dense)

from conftest import legal_eigen_schedule

S2 = 1 / math.sqrt(2)


def setup(n, seed, branching, variant):
    t = build_partition_tree(random_connected_graph(n, seed), branching)
    sched = legal_eigen_schedule(t) if variant == "eigen" else None
    return t, make_filterbanks(t, variant, sched)


def test_hand_example(four_vertex_tree):
    banks = make_filterbanks(four_vertex_tree, "haar")
    coef = analyze([1.0, 0, 0, 0], four_vertex_tree, banks)
    np.testing.assert_allclose(coef.c[0], [[.5]], atol=1e-15)
    np.testing.assert_allclose(coef.d[(0, 0)], [.5], atol=1e-15)
    np.testing.assert_allclose(coef.d[(1, 0)], [S2], atol=1e-15)
    np.testing.assert_allclose(coef.d[(1, 1)], [0.0], atol=1e-15)
    np.testing.assert_allclose(coef.flatten(), [.5, .5, S2, 0.0], atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.integers(0, 10 ** 6), st.integers(2, 4),
       st.sampled_from(["haar", "tree", "eigen"]))
def test_fast_matches_dense_and_reconstructs(n, seed, branching, variant):
    t, banks = setup(n, seed, branching, variant)
    fa = build_frame(t, banks)
    f = np.random.default_rng(seed).normal(size=n)
    coef = analyze(f, t, banks)
    flat = coef.flatten()
    np.testing.assert_allclose(flat, analyze_dense(f, fa), atol=1e-10)
    assert np.linalg.norm(flat) == pytest.approx(np.linalg.norm(f), rel=1e-10)
    np.testing.assert_allclose(synthesize(coef, t, banks), f, atol=1e-10)
    np.testing.assert_allclose(synthesize_dense(flat, fa), f, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 60), st.integers(0, 10 ** 6), st.sampled_from(["haar", "tree"]))
def test_synthesis_is_adjoint(n, seed, variant):
    t, banks = setup(n, seed, 3, variant)
    plan = TransformPlan(t, banks)
    rng = np.random.default_rng(seed)
    f = rng.normal(size=n)
    x = rng.normal(size=plan.m)
    lhs = analyze(f, t, banks, plan).flatten() @ x
    rhs = f @ synthesize(CoefficientTree.from_flat(x, t, banks, plan), t, banks, plan)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


def test_linearity():
    t, banks = setup(80, 3, 3, "tree")
    rng = np.random.default_rng(0)
    f, g = rng.normal(size=(2, 80))
    lhs = analyze(2.5 * f - g, t, banks).flatten()
    rhs = 2.5 * analyze(f, t, banks).flatten() - analyze(g, t, banks).flatten()
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_locality():
    t, banks = setup(90, 8, 3, "haar")
    j = t.J - 1
    cluster = t.levels[j][0]
    f = np.zeros(t.n)
    f[cluster.members] = np.random.default_rng(1).normal(size=cluster.members.size)
    coef = analyze(f, t, banks)
    for (jj, k), vec in coef.d.items():
        if jj >= j and not (jj == j and k == 0):
            support = set(t.node(jj, k).members.tolist())
            if not support & set(cluster.members.tolist()):
                assert np.all(vec == 0.0)


def test_wrong_length():
    t, banks = setup(10, 1, 2, "haar")
    with pytest.raises(InputError):
        analyze(np.ones(9), t, banks)
    with pytest.raises(InputError):
        CoefficientTree.from_flat(np.ones(3), t, banks)


@pytest.mark.parametrize("suffix", [".json", ".bin"])
def test_coefficient_files(tmp_path, suffix):
    t, banks = setup(50, 2, 3, "eigen")
    f = np.random.default_rng(2).normal(size=50)
    coef = analyze(f, t, banks)
    path = tmp_path / f"c{suffix}"
    save_coefficients(coef, path)
    back = load_coefficients(path, t, banks)
    assert back.flatten().tobytes() == coef.flatten().tobytes()
    np.testing.assert_allclose(synthesize(back, t, banks), f, atol=1e-10)


def test_binary_header(tmp_path, four_vertex_tree):
    banks = make_filterbanks(four_vertex_tree, "haar")
    save_coefficients(analyze([1.0, 2, 3, 4], four_vertex_tree, banks), tmp_path / "c.bin")
    raw = (tmp_path / "c.bin").read_bytes()
    assert raw[:4] == b"SGFC" and len(raw) == 16 + 4 * 8
    (tmp_path / "bad.bin").write_bytes(raw[:-3])
    with pytest.raises(ParseError):
        read_flat_binary(tmp_path / "bad.bin")
    (tmp_path / "bad.bin").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ParseError):
        read_flat_binary(tmp_path / "bad.bin")


@pytest.mark.parametrize("text", [
    '{"c0": [1.0], "d": {}}',
    '{"c0": [1.0, 2.0], "d": {"0:0": [1], "1:0": [1], "1:1": [1]}}',
    '{"c0": [1.0], "d": {"0:0": [1, 2], "1:0": [1], "1:1": [1]}}',
    '{"d": {}}',
    '{"c0": [1.0], "d": {"0-0": [1]}}',
    '{"c0": [1.0], ',
])
def test_malformed_json(tmp_path, four_vertex_tree, text):
    banks = make_filterbanks(four_vertex_tree, "haar")
    (tmp_path / "c.json").write_text(text)
    with pytest.raises(ParseError):
        load_coefficients(tmp_path / "c.json", four_vertex_tree, banks)


@pytest.mark.parametrize("variant", ["haar", "tree", "eigen"])
def test_constant_signal_details_on_balanced_trees(variant):
    for k in range(2, 7):
        t = build_partition_tree(path_graph(2 ** k), 2)
        banks = make_filterbanks(t, variant)
        coef = analyze(np.ones(t.n), t, banks)
        assert max(np.abs(v).max() for v in coef.d.values()) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 80), st.integers(0, 10 ** 6), st.sampled_from(["haar", "tree", "eigen"]))
def test_constant_signal_details_vanish_above_leaves(n, seed, variant):
    t, banks = setup(n, seed, 3, variant)
    coef = analyze(np.full(n, 2.5), t, banks)
    for (j, k), vec in coef.d.items():
        if j == t.J - 1:
            assert np.abs(vec).max(initial=0.0) <= 1e-10
