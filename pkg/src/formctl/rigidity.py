"""Rigidity matrix, rigidity classification and the reference shape library."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .graphs import (
    FormationGraph,
    GraphError,
    block_diag,
    incidence_matrix,
    kron_lift,
    relative_positions,
)

Matrix = NDArray[np.float64]


class ShapeError(ValueError):
    """Shape inconsistent with its graph or not rigid."""


def numerical_rank(M: Matrix) -> int:
    """Rank via SVD with tolerance max(rows, cols) * eps * sigma_max."""
    s = np.linalg.svd(np.asarray(M, float), compute_uv=False)
    if s.size == 0:
        return 0
    tol = max(M.shape) * np.finfo(float).eps * s[0]
    return int((s > tol).sum())


def rigidity_matrix(g: FormationGraph, z: Matrix, m: int = 2) -> Matrix:
    """R(z) = D_z^T Bbar^T, the Jacobian of the squared edge lengths / 2."""
    z = np.asarray(z, float).reshape(-1)
    if z.size != g.n_edges * m:
        raise GraphError(f"expected {g.n_edges * m} entries in z, got {z.size}")
    Bbar = kron_lift(incidence_matrix(g), m)
    return block_diag(z, m).T @ Bbar.T


@dataclass(frozen=True)
class Framework:
    """A graph together with an embedding of its vertices."""

    graph: FormationGraph
    p: Matrix
    m: int = 2

    def __post_init__(self):
        p = np.asarray(self.p, float).reshape(-1)
        if p.size != self.graph.n * self.m:
            raise ShapeError(f"expected {self.graph.n * self.m} coordinates, got {p.size}")
        object.__setattr__(self, "p", p)

    def z(self) -> Matrix:
        return relative_positions(self.graph, self.p, self.m)


def classify_rigidity(fw: Framework) -> dict:
    """Rank test: infinitesimally rigid iff rank R(z) = 2n-3 (2D) / 3n-6 (3D),
    minimally rigid iff additionally the edge count meets that bound."""
    n, m = fw.graph.n, fw.m
    if (m == 2 and n < 2) or (m == 3 and n < 3):
        raise ShapeError(f"degenerate vertex count n={n} in {m}D")
    required = 2 * n - 3 if m == 2 else 3 * n - 6
    rank = numerical_rank(rigidity_matrix(fw.graph, fw.z(), m))
    inf_rigid = rank == required
    return {
        "rank": rank,
        "required_rank": required,
        "infinitesimally_rigid": inf_rigid,
        "minimally_rigid": inf_rigid and fw.graph.n_edges == required,
    }


@dataclass(frozen=True)
class DesiredShape:
    """Reference relative positions in the body frame plus derived distances.

    The realization of z_star must be infinitesimally and minimally rigid;
    this is checked at construction.
    """

    graph: FormationGraph
    z_star: Matrix
    m: int = 2
    l: int = 2
    d: Matrix = None  # derived, cached

    def __post_init__(self):
        z = np.asarray(self.z_star, float).reshape(-1)
        if z.size != self.graph.n_edges * self.m:
            raise ShapeError(
                f"expected {self.graph.n_edges * self.m} entries in z_star, got {z.size}"
            )
        if self.l < 1:
            raise ShapeError(f"potential order must be >= 1, got {self.l}")
        object.__setattr__(self, "z_star", z)
        d = np.linalg.norm(z.reshape(-1, self.m), axis=1)
        object.__setattr__(self, "d", d)
        if np.any(d <= 0):
            raise ShapeError("zero-length reference edge")
        cls = classify_rigidity(Framework(self.graph, self.positions(), self.m))
        if not (cls["infinitesimally_rigid"] and cls["minimally_rigid"]):
            raise ShapeError(
                "reference shape is not infinitesimally and minimally rigid "
                f"(rank {cls['rank']}, required {cls['required_rank']})"
            )

    def positions(self) -> Matrix:
        """Body-frame realization of z_star with centroid at the origin."""
        Bbar = kron_lift(incidence_matrix(self.graph), self.m)
        p, *_ = np.linalg.lstsq(Bbar.T, self.z_star, rcond=None)
        P = p.reshape(self.graph.n, self.m)
        return (P - P.mean(axis=0)).reshape(-1)


def _shape_from_positions(edges, pts, l=2) -> DesiredShape:
    pts = np.asarray(pts, float)
    m = pts.shape[1]
    g = FormationGraph(len(pts), edges)
    z = relative_positions(g, pts.reshape(-1), m)
    return DesiredShape(g, z, m=m, l=l)


def shape_library(name: str, scale: float = 1.0, *, d3: float | None = None, l: int = 2) -> DesiredShape:
    """Reference shapes used by scenarios and tests.

    isosceles_triangle takes the two equal sides from ``scale`` and the base
    from ``d3`` (default 1.2 * scale).
    """
    if scale <= 0:
        raise ShapeError(f"scale must be positive, got {scale}")
    s = float(scale)
    if name == "equilateral_triangle":
        pts = [(0.0, 0.0), (s, 0.0), (s / 2, s * np.sqrt(3) / 2)]
        return _shape_from_positions([(1, 2), (2, 3), (3, 1)], pts, l)
    if name == "isosceles_triangle":
        base = 1.2 * s if d3 is None else float(d3)
        if not 0 < base < 2 * s:
            raise ShapeError(f"base {base} incompatible with equal sides {s}")
        h = np.sqrt(s * s - (base / 2) ** 2)
        # d_1 = d_2 = s on edges (1,2) and (2,3), base d_3 on edge (3,1)
        pts = [(0.0, 0.0), (base / 2, h), (base, 0.0)]
        return _shape_from_positions([(1, 2), (2, 3), (3, 1)], pts, l)
    if name == "square_with_diagonal":
        # sides 1-2, 2-3, 1-4, 3-4 of length s; diagonal 1-3 of length s*sqrt(2)
        pts = [(s, 0.0), (0.0, 0.0), (0.0, s), (s, s)]
        return _shape_from_positions([(1, 2), (2, 3), (3, 1), (1, 4), (3, 4)], pts, l)
    if name == "enclosing_quad":
        # vertex 1 is the enclosed target; d = (sqrt2 a, a, a, sqrt2 a, a)
        a = s
        pts = [(0.0, 0.0), (a, a), (a, 0.0), (2 * a, 0.0)]
        return _shape_from_positions([(1, 2), (2, 3), (3, 1), (4, 2), (4, 3)], pts, l)
    if name == "regular_tetrahedron":
        pts = [
            (0.0, 0.0, 0.0),
            (s, 0.0, 0.0),
            (s / 2, s * np.sqrt(3) / 2, 0.0),
            (s / 2, s * np.sqrt(3) / 6, s * np.sqrt(2.0 / 3.0)),
        ]
        edges = [(1, 2), (2, 3), (3, 1), (1, 4), (2, 4), (3, 4)]
        return _shape_from_positions(edges, pts, l)
    raise ShapeError(f"unknown shape {name!r}")


LIBRARY_SHAPES = (
    "equilateral_triangle",
    "isosceles_triangle",
    "square_with_diagonal",
    "enclosing_quad",
    "regular_tetrahedron",
)
