import numpy as np
import pytest

from tiara import (DiffusionConfig, DiffusionState, PostProcessConfig,
                   SparseMatrix, apply_post, delete_node, drop_weights,
                   insert_node, sequence_from_pairs, step, symmetric_trick,
                   undirected_average)

from conftest import random_sparse, random_stochastic


class TestSymmetricTrick:
    def test_identity_fixed_point(self):
        eye = SparseMatrix.identity(4)
        assert symmetric_trick(eye) == eye

    def test_two_node_example(self):
        # off-diagonals plus unit diagonal: degrees are all 2
        m = SparseMatrix.from_entries(2, 2, [(0, 1, 0.3), (1, 0, 0.7),
                                             (0, 0, 1.0), (1, 1, 1.0)])
        out = symmetric_trick(m)
        assert np.allclose(out.to_dense(), 0.5)

    def test_exactly_symmetric(self, rng):
        m = random_sparse(rng, 12, 12, density=0.3)
        m = SparseMatrix(12, 12, np.append(m.rows, range(12)),
                         np.append(m.cols, range(12)),
                         np.append(m.vals, np.ones(12)))
        out = symmetric_trick(m).to_dense()
        assert np.array_equal(out, out.T)

    def test_eigenvalues_real_in_unit_interval(self, rng):
        for _ in range(5):
            m = random_stochastic(rng, 40)
            lam = np.linalg.eigvals(symmetric_trick(m).to_dense())
            assert np.abs(lam.imag).max() <= 1e-9
            assert lam.real.min() >= -1.0 - 1e-9
            assert lam.real.max() <= 1.0 + 1e-9

    def test_isolated_node_rejected(self):
        m = SparseMatrix(3, 3, [0, 1, 0], [0, 0, 1], [1.0, 1.0, 1.0])
        with pytest.raises(ValueError, match="isolated"):
            symmetric_trick(m)

    def test_requires_square(self):
        with pytest.raises(ValueError):
            symmetric_trick(SparseMatrix(2, 3))


class TestUndirectedAverage:
    def test_symmetric_input_unchanged(self, rng):
        m = random_sparse(rng, 8, 8, density=0.3)
        sym = undirected_average(m)
        assert undirected_average(sym) == sym

    def test_single_entry_halved(self):
        m = SparseMatrix(2, 2, [0], [1], [0.4])
        out = undirected_average(m)
        assert out.entries == [(1, 0, 0.2), (0, 1, 0.2)]

    def test_column_sums_are_averaged(self, rng):
        m = random_sparse(rng, 9, 9, density=0.4)
        out = undirected_average(m)
        expected = (m.col_sums() + m.row_sums()) / 2
        assert np.allclose(out.col_sums(), expected, atol=1e-14)


class TestDropWeights:
    def test_binarizes(self, rng):
        m = random_sparse(rng, 6, 6, density=0.4)
        out = drop_weights(m)
        assert np.array_equal(out.rows, m.rows)
        assert np.all(out.vals == 1.0)


class TestApplyPost:
    def test_symmetric_trick_wins_with_warning(self, rng):
        m = random_stochastic(rng, 6)
        cfg = PostProcessConfig(symmetric_trick=True, undirected_average=True)
        with pytest.warns(UserWarning, match="subsumed"):
            out = apply_post(m, cfg)
        assert out == symmetric_trick(m)

    def test_average_then_binarize(self, rng):
        m = random_stochastic(rng, 6)
        cfg = PostProcessConfig(drop_weights=True, undirected_average=True)
        assert apply_post(m, cfg) == drop_weights(undirected_average(m))

    def test_noop(self, rng):
        m = random_stochastic(rng, 5)
        assert apply_post(m, PostProcessConfig()) is m


class TestInsertNode:
    def test_identity_grows(self):
        st = DiffusionState.initial(2)
        grown = insert_node(st)
        assert grown.x_prev == SparseMatrix.identity(3)

    def test_columns_preserved(self, rng):
        st = DiffusionState(random_stochastic(rng, 7), 3)
        grown = insert_node(st)
        sums = grown.x_prev.col_sums()
        assert np.array_equal(sums[:7], st.x_prev.col_sums())
        assert sums[7] == 1.0
        assert grown.t == 3

    def test_new_node_participates_in_next_step(self, rng):
        st = DiffusionState(random_stochastic(rng, 4), 1)
        grown = insert_node(st)
        seq = sequence_from_pairs(5, [[(4, 0), (0, 4)]])
        cfg = DiffusionConfig(alpha=0.25, beta=0.25, iterations=20,
                              epsilon=0.0, transpose_output=False)
        out, _ = step(seq.snapshots[0], seq.activated[0], grown, cfg)
        column = out.to_dense()[:, 4]
        assert column[0] > 0.0  # mass diffused from the new node


class TestDeleteNode:
    def test_identity_shrinks(self):
        st = DiffusionState.initial(3)
        shrunk, report = delete_node(st, 1)
        assert shrunk.x_prev == SparseMatrix.identity(2)
        assert report.mapping.tolist() == [0, -1, 1]
        assert report.emptied_columns == ()

    def test_renormalizes_remaining_mass(self):
        # column 2 holds 0.4 at the deleted node 1 and 0.6 at node 0
        m = SparseMatrix.from_entries(3, 3, [(0, 0, 1.0), (1, 1, 1.0),
                                             (1, 2, 0.4), (0, 2, 0.6)])
        shrunk, report = delete_node(DiffusionState(m, 2), 1)
        assert shrunk.x_prev.get(0, 1) == 1.0  # 0.6 rescaled
        assert report.emptied_columns == ()

    def test_emptied_column_flagged(self):
        m = SparseMatrix.from_entries(3, 3, [(0, 0, 1.0), (1, 1, 1.0),
                                             (2, 2, 1.0)])
        # delete node 1: column 1 disappears with it; old column 2 (new 1)
        # kept its own diagonal mass
        shrunk, report = delete_node(DiffusionState(m, 0), 1)
        assert report.emptied_columns == ()
        m2 = SparseMatrix.from_entries(3, 3, [(0, 0, 1.0), (1, 1, 0.5),
                                             (0, 1, 0.5), (1, 2, 1.0)])
        # here column 2's only mass sits at the deleted node 1
        shrunk, report = delete_node(DiffusionState(m2, 0), 1)
        assert report.emptied_columns == (1,)

    def test_stochastic_preserved(self, rng):
        for _ in range(20):
            n = int(rng.integers(3, 12))
            st = DiffusionState(random_stochastic(rng, n), 0)
            shrunk, _ = delete_node(st, int(rng.integers(0, n)))
            sums = shrunk.x_prev.col_sums()
            nonempty = sums > 0
            assert np.abs(sums[nonempty] - 1.0).max() <= 1e-12

    def test_single_node_rejected(self):
        with pytest.raises(ValueError):
            delete_node(DiffusionState.initial(1), 0)

    def test_round_trip_with_insert(self, rng):
        for _ in range(10):
            st = DiffusionState(random_stochastic(rng, 6), 1)
            back, report = delete_node(insert_node(st), 6)
            assert back.x_prev == st.x_prev
            assert report.emptied_columns == ()
