"""Formation sensing graphs and the structural matrices derived from them.

Edges are stored directed as (tail, head) pairs with 1-based vertex
indices; all sign conventions downstream (incidence, split and motion
matrices) depend on that orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

Matrix = NDArray[np.float64]


class GraphError(ValueError):
    """Invalid graph structure or an index out of range."""


@dataclass(frozen=True)
class FormationGraph:
    """Directed edge list over ``n`` vertices, 1-based indices.

    The k-th entry of ``edges`` is the k-th edge; the undirected neighbor
    sets are derived from it.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __init__(self, n: int, edges) -> None:
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", tuple((int(i), int(j)) for i, j in edges))
        self._validate()

    def _validate(self) -> None:
        if self.n < 2:
            raise GraphError(f"need at least 2 vertices, got {self.n}")
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise GraphError(f"self-loop at vertex {i}")
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise GraphError(f"edge ({i},{j}) outside vertex range 1..{self.n}")
            key = frozenset((i, j))
            if key in seen:
                raise GraphError(f"duplicate undirected edge {{{i},{j}}}")
            seen.add(key)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> set[int]:
        """Undirected neighbor set of vertex ``i`` (1-based)."""
        out = set()
        for a, b in self.edges:
            if a == i:
                out.add(b)
            elif b == i:
                out.add(a)
        return out

    def min_degree(self) -> int:
        return min(len(self.neighbors(i)) for i in range(1, self.n + 1))

    def tails_heads(self) -> tuple[NDArray[np.intp], NDArray[np.intp]]:
        """0-based tail and head index arrays, one entry per edge."""
        t = np.array([i - 1 for i, _ in self.edges], dtype=np.intp)
        h = np.array([j - 1 for _, j in self.edges], dtype=np.intp)
        return t, h


def incidence_matrix(g: FormationGraph) -> Matrix:
    """Vertex-by-edge matrix with +1 at tails and -1 at heads."""
    B = np.zeros((g.n, g.n_edges))
    for k, (i, j) in enumerate(g.edges):
        B[i - 1, k] = 1.0
        B[j - 1, k] = -1.0
    return B


def kron_lift(M: Matrix, m: int) -> Matrix:
    """The bar operator: M kron I_m."""
    if m not in (2, 3):
        raise GraphError(f"dimension must be 2 or 3, got {m}")
    return np.kron(np.asarray(M, dtype=float), np.eye(m))


def relative_positions(g: FormationGraph, p: Matrix, m: int = 2) -> Matrix:
    """Stacked relative positions z with z_k = p_tail - p_head."""
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size != g.n * m:
        raise GraphError(f"expected {g.n * m} position entries, got {p.size}")
    P = p.reshape(g.n, m)
    t, h = g.tails_heads()
    return (P[t] - P[h]).reshape(-1)


def block_diag(x: Matrix, block: int) -> Matrix:
    """D_x: stack of k blocks of size ``block`` placed on a block diagonal.

    D_z^T y computes per-edge inner products; D_z^T z gives ||z_k||^2.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size % block != 0:
        raise GraphError(f"length {x.size} not divisible by block size {block}")
    k = x.size // block
    D = np.zeros((x.size, k))
    for i in range(k):
        D[i * block : (i + 1) * block, i] = x[i * block : (i + 1) * block]
    return D


def split_matrices(g: FormationGraph) -> tuple[Matrix, Matrix]:
    """S1 (positive part of B) and S2 = S1 - B (heads, sign-flipped)."""
    B = incidence_matrix(g)
    S1 = np.where(B > 0, B, 0.0)
    S2 = S1 - B
    return S1, S2


def masked_incidence(g: FormationGraph, excluded_vertex: int) -> Matrix:
    """B with the excluded vertex's row zeroed (target does not react)."""
    if not (1 <= excluded_vertex <= g.n):
        raise GraphError(f"vertex {excluded_vertex} outside 1..{g.n}")
    B = incidence_matrix(g)
    B[excluded_vertex - 1, :] = 0.0
    return B


def augmented_incidence(g: FormationGraph) -> Matrix:
    """Incidence-shaped matrix carrying only the orientation edge.

    By scenario convention the oriented edge is the first one and must be
    (1, 2); the matrix is zero except for entries (1,1)=+1 and (2,1)=-1.
    """
    if not g.edges or g.edges[0] != (1, 2):
        raise GraphError("orientation convention requires edge 1 to be (1, 2)")
    Ba = np.zeros((g.n, g.n_edges))
    Ba[0, 0] = 1.0
    Ba[1, 0] = -1.0
    return Ba
