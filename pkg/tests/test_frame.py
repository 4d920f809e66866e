import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from sgframes.bench import random_connected_graph
from sgframes.errors import ConfigurationError, InputError, ParseError, VerificationError
from sgframes.filterbanks import FilterPair, haar_filterbank, make_filterbanks
from sgframes.frame import (FrameAtoms, build_frame, dec, expected_atom_count, export_frame,
                            import_frame, index_path, verify_tight)
from sgframes.graph import complete_graph, path_graph
from sgframes.partition import build_partition_tree

from conftest import hand_tree, legal_eigen_schedule

S2 = 1 / math.sqrt(2)


def naive_frame(t, banks):
    """Plain-loop reference: low[j][k] is a list of R_j dense vectors."""
    n = t.n
    low = {(t.J, v): [np.eye(n)[v]] for v in range(n)}
    high = {}
    for j in range(t.J - 1, -1, -1):
        for node in t.levels[j]:
            fp = banks[(j, node.index)]
            kids = [low[(j + 1, c)] for c in node.children]
            R = len(kids[0])
            low[(j, node.index)] = [sum(fp.A[a, x] * kids[x][i] for x in range(fp.c))
                                    for a in range(fp.r) for i in range(R)]
            high[(j, node.index)] = [sum(fp.B[b, x] * kids[x][i] for x in range(fp.c))
                                     for b in range(fp.m) for i in range(R)]
    rows = list(low[(0, 0)])
    for key in sorted(high):
        rows.extend(high[key])
    return np.array(rows)


class TestDec:
    def test_two_unit_vectors(self):
        fp = haar_filterbank(2)
        low, high = dec([[[1.0, 0.0]], [[0.0, 1.0]]], 1, fp.A, fp.B)
        np.testing.assert_allclose(low, [[S2, S2]], atol=1e-15)
        np.testing.assert_allclose(high, [[S2, -S2]], atol=1e-15)

    def test_row_order_with_r_two(self):
        I = np.eye(4)
        fp = haar_filterbank(2)
        low, high = dec([I[[0, 1]], I[[2, 3]]], 2, fp.A, fp.B)
        np.testing.assert_allclose(low, S2 * np.array([[1, 0, 1, 0], [0, 1, 0, 1]]), atol=1e-15)
        np.testing.assert_allclose(high, S2 * np.array([[1, 0, -1, 0], [0, 1, 0, -1]]), atol=1e-15)

    def test_low_orthonormal_and_high_tight(self):
        rng = np.random.default_rng(1)
        Q = np.linalg.qr(rng.normal(size=(9, 9)))[0].T
        stack = Q.reshape(3, 3, 9)
        A = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        fp = FilterPair(A[:2].copy(), A[2:].copy(), "custom")
        low, high = dec(stack, 3, fp.A, fp.B, check=True)
        np.testing.assert_allclose(low @ low.T, np.eye(6), atol=1e-12)
        P = Q.T @ Q
        np.testing.assert_allclose(low.T @ low + high.T @ high, P, atol=1e-12)

    def test_check_rejects_non_orthonormal(self):
        fp = haar_filterbank(2)
        with pytest.raises(InputError):
            dec([[[1.0, 1.0]], [[0.0, 1.0]]], 1, fp.A, fp.B, check=True)

    def test_shape_errors(self):
        fp = haar_filterbank(3)
        with pytest.raises(InputError):
            dec([[[1.0, 0.0]], [[0.0, 1.0]]], 1, fp.A, fp.B)
        with pytest.raises(InputError):
            dec([[[1.0, 0.0]], [[0.0, 1.0]]], 2, fp.A, fp.B)


class TestBuild:
    def test_four_vertex_haar(self, four_vertex_tree):
        fa = build_frame(four_vertex_tree, make_filterbanks(four_vertex_tree, "haar"))
        expected = np.array([[.5, .5, .5, .5],
                             [.5, .5, -.5, -.5],
                             [S2, -S2, 0, 0],
                             [0, 0, S2, -S2]])
        np.testing.assert_allclose(fa.dense(), expected, atol=1e-15)
        assert fa.level.tolist() == [0, 0, 1, 1]
        assert fa.node.tolist() == [0, 0, 0, 1]
        assert fa.kind.tolist() == [0, 1, 1, 1]

    def test_three_children_root(self):
        t = hand_tree(path_graph(3), [[[0, 1, 2]]])
        fa = build_frame(t, make_filterbanks(t, "haar"))
        assert fa.m == 4
        assert verify_tight(fa).passed

    @pytest.mark.parametrize("seed", range(6))
    def test_eigen_is_orthonormal_basis(self, seed):
        t = build_partition_tree(random_connected_graph(60, seed, 40), 4)
        banks = make_filterbanks(t, "eigen", legal_eigen_schedule(t))
        fa = build_frame(t, banks)
        assert fa.m == t.n
        np.testing.assert_allclose(fa.dense() @ fa.dense().T, np.eye(t.n), atol=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 40), st.integers(0, 10 ** 6), st.integers(2, 4),
           st.sampled_from(["haar", "tree", "eigen"]))
    def test_matches_naive_reference(self, n, seed, branching, variant):
        t = build_partition_tree(random_connected_graph(n, seed), branching)
        sched = legal_eigen_schedule(t) if variant == "eigen" else None
        banks = make_filterbanks(t, variant, sched)
        fa = build_frame(t, banks)
        np.testing.assert_allclose(fa.dense(), naive_frame(t, banks), atol=1e-12)
        assert fa.m == expected_atom_count(t, banks)
        assert verify_tight(fa).passed

    def test_schedule_mismatch(self, four_vertex_tree):
        banks = make_filterbanks(four_vertex_tree, "haar")
        with pytest.raises(ConfigurationError):
            build_frame(four_vertex_tree, banks, r_schedule=[2, 1])

    def test_missing_bank(self, four_vertex_tree):
        banks = make_filterbanks(four_vertex_tree, "haar")
        del banks[(1, 1)]
        with pytest.raises(ConfigurationError):
            build_frame(four_vertex_tree, banks)

    def test_bad_filter_pair(self, four_vertex_tree):
        banks = make_filterbanks(four_vertex_tree, "haar")
        fp = banks[(0, 0)]
        banks[(0, 0)] = FilterPair(fp.A, 0.9 * fp.B, "haar")
        with pytest.raises(VerificationError):
            build_frame(four_vertex_tree, banks)

    def test_blocks(self, four_vertex_tree):
        fa, blocks = build_frame(four_vertex_tree, make_filterbanks(four_vertex_tree, "haar"),
                                 collect_blocks=True)
        root_high = [b for b in blocks if b.node == (0, 0) and b.kind == "high"][0]
        np.testing.assert_allclose(root_high.to_dense(4), [[.5, .5, -.5, -.5]], atol=1e-15)


class TestVerify:
    @pytest.fixture
    def frame(self):
        t = build_partition_tree(random_connected_graph(30, 7, 20), 3)
        return build_frame(t, make_filterbanks(t, "tree"))

    def test_passes(self, frame):
        report = verify_tight(frame)
        assert report.passed and report.deviation <= 1e-10
        assert set(report.orthogonality) == set(range(len(frame.config["R"]) - 1))

    def test_zeroed_atom(self, frame):
        dense = frame.dense()
        dense[1] = 0
        broken = FrameAtoms(frame.n, sp.csr_matrix(dense), frame.level, frame.node, frame.kind,
                            frame.position, frame.supports)
        assert not verify_tight(broken).passed

    def test_scaled_atoms(self, frame):
        scaled = FrameAtoms(frame.n, 2 * frame.atoms, frame.level, frame.node, frame.kind,
                            frame.position, frame.supports)
        assert verify_tight(scaled).deviation == pytest.approx(3.0, abs=1e-10)

    def test_support_violation(self, frame):
        dense = frame.dense()
        row = frame.rows(frame.level.max(), kind="high")[0]
        outside = np.setdiff1d(np.arange(frame.n), frame.supports[(frame.level[row], frame.node[row])])
        dense[row, outside[0]] = 1e-3
        moved = FrameAtoms(frame.n, sp.csr_matrix(dense), frame.level, frame.node, frame.kind,
                           frame.position, frame.supports)
        assert verify_tight(moved).support_violations == [row]

    def test_orthogonality_detects_leak(self, four_vertex_tree):
        fa = build_frame(four_vertex_tree, make_filterbanks(four_vertex_tree, "haar"))
        dense = fa.dense()
        dense[3] = [.5, .5, .5, .5]
        leaky = FrameAtoms(4, sp.csr_matrix(dense), fa.level, fa.node, fa.kind, fa.position,
                           fa.supports)
        assert verify_tight(leaky).orthogonality[1] == pytest.approx(1.0)

    def test_needs_m_at_least_n(self):
        with pytest.raises(InputError):
            FrameAtoms(3, sp.csr_matrix((2, 3)), np.zeros(2), np.zeros(2), np.zeros(2),
                       np.zeros(2), {})


class TestFileRoundTrip:
    def test_round_trip(self, tmp_path):
        t = build_partition_tree(complete_graph(7), 3)
        fa = build_frame(t, make_filterbanks(t, "tree"))
        export_frame(fa, tmp_path / "f.mtx")
        assert index_path(tmp_path / "f.mtx").name == "f.index.json"
        back = import_frame(tmp_path / "f.mtx")
        assert (back.atoms != fa.atoms).nnz == 0
        for name in ("level", "node", "kind", "position"):
            np.testing.assert_array_equal(getattr(back, name), getattr(fa, name))
        assert back.config == fa.config
        assert verify_tight(back).passed

    def test_truncated(self, tmp_path, four_vertex_tree):
        fa = build_frame(four_vertex_tree, make_filterbanks(four_vertex_tree, "haar"))
        path = tmp_path / "f.mtx"
        export_frame(fa, path)
        lines = path.read_text().splitlines(keepends=True)
        path.write_text("".join(lines[:-2]))
        with pytest.raises(ParseError):
            import_frame(path)

    def test_empty_frame(self, tmp_path):
        path = tmp_path / "f.mtx"
        path.write_text("%%MatrixMarket matrix coordinate real general\n0 4 0\n")
        index_path(path).write_text('{"n": 4, "m": 0, "level": [], "node": [], "kind": [], '
                                    '"position": [], "supports": {}}')
        with pytest.raises(ParseError):
            import_frame(path)

    def test_missing_sidecar(self, tmp_path, four_vertex_tree):
        fa = build_frame(four_vertex_tree, make_filterbanks(four_vertex_tree, "haar"))
        export_frame(fa, tmp_path / "f.mtx")
        index_path(tmp_path / "f.mtx").unlink()
        with pytest.raises(ParseError):
            import_frame(tmp_path / "f.mtx")

    def test_shape_mismatch(self, tmp_path, four_vertex_tree):
        fa = build_frame(four_vertex_tree, make_filterbanks(four_vertex_tree, "haar"))
        export_frame(fa, tmp_path / "f.mtx")
        side = index_path(tmp_path / "f.mtx")
        side.write_text(side.read_text().replace('"m": 4', '"m": 5'))
        with pytest.raises(ParseError):
            import_frame(tmp_path / "f.mtx")
