import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from formctl.graphs import FormationGraph, relative_positions
from formctl.rigidity import (
    LIBRARY_SHAPES,
    DesiredShape,
    Framework,
    ShapeError,
    classify_rigidity,
    numerical_rank,
    rigidity_matrix,
    shape_library,
)

TRIANGLE = FormationGraph(3, [(1, 2), (2, 3), (3, 1)])


def test_numerical_rank_basic():
    assert numerical_rank(np.eye(3)) == 3
    assert numerical_rank(np.zeros((2, 2))) == 0
    M = np.array([[1.0, 2.0], [2.0, 4.0]])
    assert numerical_rank(M) == 1


def test_rigidity_matrix_rows_are_edge_gradients():
    p = np.array([0.0, 0.0, 1.0, 0.0, 0.5, 1.0])
    z = relative_positions(TRIANGLE, p, 2)
    R = rigidity_matrix(TRIANGLE, z, 2)
    assert R.shape == (3, 6)
    # row k is d(||z_k||^2)/2 d p: z_k^T placed at tail, -z_k^T at head
    zk = z.reshape(3, 2)
    np.testing.assert_allclose(R[0, :2], zk[0])
    np.testing.assert_allclose(R[0, 2:4], -zk[0])
    np.testing.assert_allclose(R[0, 4:], 0)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_rank_invariant_under_rigid_motion(seed):
    rng = np.random.default_rng(seed)
    p = rng.normal(size=6)
    a = rng.uniform(-np.pi, np.pi)
    Q = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    shift = rng.normal(size=2)
    p2 = (p.reshape(3, 2) @ Q.T + shift).reshape(-1)
    r1 = numerical_rank(rigidity_matrix(TRIANGLE, relative_positions(TRIANGLE, p, 2), 2))
    r2 = numerical_rank(rigidity_matrix(TRIANGLE, relative_positions(TRIANGLE, p2, 2), 2))
    assert r1 == r2


class TestClassification:
    def test_triangle(self):
        fw = Framework(TRIANGLE, [0, 0, 1, 0, 0.5, 1], 2)
        rep = classify_rigidity(fw)
        assert rep == {
            "rank": 3,
            "required_rank": 3,
            "infinitesimally_rigid": True,
            "minimally_rigid": True,
        }

    def test_collinear_triangle_not_rigid(self):
        fw = Framework(TRIANGLE, [0, 0, 1, 0, 2, 0], 2)
        assert not classify_rigidity(fw)["infinitesimally_rigid"]

    def test_square_without_diagonal(self):
        g = FormationGraph(4, [(1, 2), (2, 3), (3, 4), (4, 1)])
        fw = Framework(g, [0, 0, 1, 0, 1, 1, 0, 1], 2)
        rep = classify_rigidity(fw)
        assert rep["rank"] == 4 and rep["required_rank"] == 5
        assert not rep["infinitesimally_rigid"]

    def test_square_with_diagonal(self):
        shape = shape_library("square_with_diagonal", 225.0)
        fw = Framework(shape.graph, shape.positions(), 2)
        rep = classify_rigidity(fw)
        assert rep["rank"] == 5
        assert rep["infinitesimally_rigid"] and rep["minimally_rigid"]

    def test_coplanar_tetrahedron_graph(self):
        # the complete graph on 4 vertices has the 3D edge count 3n-6 = 6,
        # but a flat embedding is not infinitesimally rigid
        g = FormationGraph(4, [(1, 2), (2, 3), (3, 1), (1, 4), (2, 4), (3, 4)])
        flat = [0, 0, 0, 1, 0, 0, 0.5, 1, 0, 0.5, 0.3, 0]
        rep = classify_rigidity(Framework(g, flat, 3))
        assert g.n_edges == rep["required_rank"] == 6
        assert not rep["infinitesimally_rigid"]

    def test_degenerate_vertex_count(self):
        g = FormationGraph(2, [(1, 2)])
        with pytest.raises(ShapeError):
            classify_rigidity(Framework(g, [0, 0, 0, 1, 0, 0], 3))


class TestDesiredShape:
    def test_rejects_flexible_reference(self):
        g = FormationGraph(4, [(1, 2), (2, 3), (3, 4), (4, 1)])
        z = relative_positions(g, [0, 0, 1, 0, 1, 1, 0, 1], 2)
        with pytest.raises(ShapeError, match="rigid"):
            DesiredShape(g, z, m=2)

    def test_rejects_wrong_size(self):
        with pytest.raises(ShapeError):
            DesiredShape(TRIANGLE, np.ones(5), m=2)

    def test_rejects_bad_order(self):
        z = relative_positions(TRIANGLE, [0, 0, 1, 0, 0.5, 1], 2)
        with pytest.raises(ShapeError):
            DesiredShape(TRIANGLE, z, m=2, l=0)

    def test_positions_reproduce_z_star(self):
        for name in LIBRARY_SHAPES:
            shape = shape_library(name, 2.0)
            z = relative_positions(shape.graph, shape.positions(), shape.m)
            np.testing.assert_allclose(z, shape.z_star, atol=1e-9)
            P = shape.positions().reshape(shape.graph.n, shape.m)
            np.testing.assert_allclose(P.mean(axis=0), 0, atol=1e-9)


class TestLibrary:
    def test_all_shapes_minimally_rigid(self):
        for name in LIBRARY_SHAPES:
            shape = shape_library(name, 1.7)
            rep = classify_rigidity(Framework(shape.graph, shape.positions(), shape.m))
            assert rep["minimally_rigid"], name

    def test_equilateral_distances(self):
        shape = shape_library("equilateral_triangle", 3.0)
        np.testing.assert_allclose(shape.d, 3.0)

    def test_isosceles_distances(self):
        shape = shape_library("isosceles_triangle", 2.0, d3=1.0)
        np.testing.assert_allclose(shape.d, [2.0, 2.0, 1.0])
        with pytest.raises(ShapeError):
            shape_library("isosceles_triangle", 1.0, d3=3.0)

    def test_square_distances(self):
        shape = shape_library("square_with_diagonal", 225.0)
        np.testing.assert_allclose(shape.d, [225, 225, 225 * np.sqrt(2), 225, 225])

    def test_enclosing_quad_distances(self):
        shape = shape_library("enclosing_quad", 130.0)
        r2 = 130 * np.sqrt(2)
        np.testing.assert_allclose(shape.d, [r2, 130, 130, r2, 130])
        assert shape.graph.edges == ((1, 2), (2, 3), (3, 1), (4, 2), (4, 3))

    def test_tetrahedron_distances(self):
        shape = shape_library("regular_tetrahedron", 1.5)
        np.testing.assert_allclose(shape.d, 1.5)
        assert shape.m == 3

    def test_unknown_shape(self):
        with pytest.raises(ShapeError):
            shape_library("pentagon")

    def test_bad_scale(self):
        with pytest.raises(ShapeError):
            shape_library("equilateral_triangle", -1.0)
