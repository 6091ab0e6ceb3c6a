import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from formctl.graphs import (
    FormationGraph,
    GraphError,
    augmented_incidence,
    block_diag,
    incidence_matrix,
    kron_lift,
    masked_incidence,
    relative_positions,
    split_matrices,
)

TRIANGLE = FormationGraph(3, [(1, 2), (2, 3), (3, 1)])


@st.composite
def graphs(draw):
    n = draw(st.integers(min_value=2, max_value=7))
    pairs = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i < j]
    chosen = draw(st.lists(st.sampled_from(pairs), min_size=1, unique=True))
    # random orientation per edge
    flips = draw(st.lists(st.booleans(), min_size=len(chosen), max_size=len(chosen)))
    edges = [(j, i) if f else (i, j) for (i, j), f in zip(chosen, flips)]
    return FormationGraph(n, edges)


class TestValidation:
    def test_self_loop(self):
        with pytest.raises(GraphError, match="self-loop"):
            FormationGraph(3, [(1, 1)])

    def test_duplicate_either_orientation(self):
        with pytest.raises(GraphError, match="duplicate"):
            FormationGraph(3, [(1, 2), (2, 1)])

    def test_out_of_range(self):
        with pytest.raises(GraphError, match="outside"):
            FormationGraph(3, [(1, 4)])

    def test_too_few_vertices(self):
        with pytest.raises(GraphError):
            FormationGraph(1, [])

    def test_frozen(self):
        with pytest.raises(Exception):
            TRIANGLE.n = 5


class TestStructure:
    def test_neighbors_undirected(self):
        assert TRIANGLE.neighbors(1) == {2, 3}
        g = FormationGraph(4, [(1, 2), (2, 3)])
        assert g.neighbors(4) == set()
        assert g.min_degree() == 0

    def test_min_degree_triangle(self):
        assert TRIANGLE.min_degree() == 2

    def test_tails_heads_zero_based(self):
        t, h = TRIANGLE.tails_heads()
        assert t.tolist() == [0, 1, 2]
        assert h.tolist() == [1, 2, 0]

    def test_incidence_triangle(self):
        B = incidence_matrix(TRIANGLE)
        expected = np.array([[1, 0, -1], [-1, 1, 0], [0, -1, 1]], float)
        np.testing.assert_array_equal(B, expected)

    @given(graphs())
    @settings(max_examples=40, deadline=None)
    def test_incidence_columns_sum_to_zero(self, g):
        B = incidence_matrix(g)
        np.testing.assert_array_equal(B.sum(axis=0), np.zeros(g.n_edges))
        assert np.abs(B).sum() == 2 * g.n_edges

    def test_kron_lift_identity(self):
        M = np.array([[1.0, 2.0], [3.0, 4.0]])
        K = kron_lift(M, 2)
        assert K.shape == (4, 4)
        np.testing.assert_array_equal(K[:2, :2], np.eye(2))

    def test_kron_lift_bad_dim(self):
        with pytest.raises(GraphError):
            kron_lift(np.eye(2), 4)

    @given(graphs(), st.integers(0, 2**31 - 1), st.sampled_from([2, 3]))
    @settings(max_examples=30, deadline=None)
    def test_relative_positions_match_incidence(self, g, seed, m):
        p = np.random.default_rng(seed).normal(size=g.n * m)
        z = relative_positions(g, p, m)
        Bbar = kron_lift(incidence_matrix(g), m)
        np.testing.assert_allclose(z, Bbar.T @ p, atol=1e-12)

    def test_relative_positions_sign(self):
        # z_k = p_tail - p_head
        p = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 1.0])
        z = relative_positions(TRIANGLE, p, 2)
        np.testing.assert_allclose(z[:2], [-1.0, 0.0])

    def test_block_diag_inner_products(self):
        z = np.array([1.0, 2.0, 3.0, 4.0])
        D = block_diag(z, 2)
        np.testing.assert_allclose(D.T @ z, [5.0, 25.0])

    def test_block_diag_bad_length(self):
        with pytest.raises(GraphError):
            block_diag(np.ones(5), 2)

    @given(graphs())
    @settings(max_examples=30, deadline=None)
    def test_split_matrices_recompose(self, g):
        S1, S2 = split_matrices(g)
        B = incidence_matrix(g)
        np.testing.assert_array_equal(S1 - S2, B)
        assert np.all(S1 >= 0) and np.all(S2 >= 0)

    def test_masked_incidence(self):
        Bd = masked_incidence(TRIANGLE, 1)
        assert np.all(Bd[0] == 0)
        np.testing.assert_array_equal(Bd[1:], incidence_matrix(TRIANGLE)[1:])
        with pytest.raises(GraphError):
            masked_incidence(TRIANGLE, 9)

    def test_augmented_incidence(self):
        Ba = augmented_incidence(TRIANGLE)
        assert Ba[0, 0] == 1 and Ba[1, 0] == -1
        assert np.abs(Ba).sum() == 2
        bad = FormationGraph(3, [(2, 3), (1, 2), (3, 1)])
        with pytest.raises(GraphError):
            augmented_incidence(bad)
