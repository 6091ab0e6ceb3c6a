"""Motion-parameter design: the A matrix, the T matrix, the translation and
rotation parameter subspaces, the design algorithms and steady-state
velocity prediction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .graphs import (
    FormationGraph,
    block_diag,
    incidence_matrix,
    kron_lift,
    split_matrices,
)
from .rigidity import DesiredShape, rigidity_matrix

Matrix = NDArray[np.float64]

ORTHO_TOL = 1e-10


class DesignError(ValueError):
    """Requested steady-state motion is not realizable by the parameters."""


@dataclass(frozen=True)
class MotionParams:
    """Per-edge parameter pair; units 1/time (they scale relative positions
    into velocities)."""

    mu: Matrix
    mu_tilde: Matrix

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, float).reshape(-1))
        object.__setattr__(self, "mu_tilde", np.asarray(self.mu_tilde, float).reshape(-1))
        if self.mu.shape != self.mu_tilde.shape:
            raise DesignError("mu and mu_tilde must have equal length")
        if not (np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.mu_tilde))):
            raise DesignError("non-finite motion parameter")

    def stacked(self) -> Matrix:
        return np.concatenate([self.mu, self.mu_tilde])

    @classmethod
    def from_stacked(cls, v: Matrix) -> "MotionParams":
        v = np.asarray(v, float).reshape(-1)
        E = v.size // 2
        return cls(v[:E], v[E:])

    def __add__(self, other: "MotionParams") -> "MotionParams":
        return MotionParams(self.mu + other.mu, self.mu_tilde + other.mu_tilde)

    @classmethod
    def zero(cls, n_edges: int) -> "MotionParams":
        return cls(np.zeros(n_edges), np.zeros(n_edges))


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis (columns) of a subspace of the parameter space."""

    basis: Matrix
    tol: float = ORTHO_TOL

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.basis, float))
        object.__setattr__(self, "basis", Q)
        G = Q.T @ Q
        if Q.shape[1] and np.abs(G - np.eye(Q.shape[1])).max() > self.tol:
            raise DesignError("basis columns are not orthonormal")

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def project(self, v: Matrix) -> Matrix:
        return self.basis @ (self.basis.T @ np.asarray(v, float))

    def angle_to(self, v: Matrix) -> float:
        """Angle (rad) between v and the subspace."""
        v = np.asarray(v, float)
        nv = np.linalg.norm(v)
        if nv == 0:
            return 0.0
        c = np.linalg.norm(self.project(v)) / nv
        return float(np.arccos(min(1.0, c)))


def nullspace(M: Matrix) -> Matrix:
    """Orthonormal nullspace basis with the standard SVD threshold."""
    M = np.atleast_2d(np.asarray(M, float))
    u, s, vh = np.linalg.svd(M)
    tol = max(M.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int((s > tol).sum())
    return vh[rank:].T


def orthonormalize(M: Matrix) -> Matrix:
    """Orthonormal basis of the column span, dropping near-zero directions."""
    M = np.atleast_2d(np.asarray(M, float))
    if M.shape[1] == 0:
        return M
    u, s, _ = np.linalg.svd(M, full_matrices=False)
    tol = max(M.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    return u[:, s > max(tol, 1e-12)]


def a_matrix(g: FormationGraph, params: MotionParams) -> Matrix:
    """Incidence-patterned matrix with mu_k at tails and mu_tilde_k at heads."""
    if params.mu.size != g.n_edges:
        raise DesignError(f"expected {g.n_edges} parameters, got {params.mu.size}")
    A = np.zeros((g.n, g.n_edges))
    for k, (i, j) in enumerate(g.edges):
        A[i - 1, k] = params.mu[k]
        A[j - 1, k] = params.mu_tilde[k]
    return A


def t_matrix(g: FormationGraph, z_star: Matrix, m: int = 2) -> Matrix:
    """T = [S1bar D_z* | S2bar D_z*]; T (mu; mu_tilde) = Abar(mu, mu_tilde) z*."""
    z_star = np.asarray(z_star, float).reshape(-1)
    S1, S2 = split_matrices(g)
    D = block_diag(z_star, m)
    return np.hstack([kron_lift(S1, m) @ D, kron_lift(S2, m) @ D])


def translation_space(g: FormationGraph, z_star: Matrix, m: int = 2) -> SubspaceBasis:
    """Parameter directions producing a common (pure-translation) velocity:
    the kernel of Bbar^T T projected onto Ker(T)-perp."""
    T = t_matrix(g, z_star, m)
    Bbar = kron_lift(incidence_matrix(g), m)
    N = nullspace(Bbar.T @ T)
    if N.shape[1] == 0:
        raise DesignError("no translation directions: degenerate shape")
    KT = nullspace(T)
    proj = N - KT @ (KT.T @ N) if KT.shape[1] else N
    return SubspaceBasis(orthonormalize(proj))


def norm_preserving_space(g: FormationGraph, z_star: Matrix, m: int = 2) -> SubspaceBasis:
    """Ker(D_z*^T Bbar^T T): all parameter directions whose velocity field
    keeps every edge norm constant at the reference shape. Contains the
    translation space and, when T is singular, zero-velocity directions."""
    T = t_matrix(g, z_star, m)
    Bbar = kron_lift(incidence_matrix(g), m)
    D = block_diag(np.asarray(z_star, float).reshape(-1), m)
    K = nullspace(D.T @ Bbar.T @ T)
    if K.shape[1] == 0:
        raise DesignError("no norm-preserving directions: degenerate shape")
    return SubspaceBasis(K)


def rotation_space(g: FormationGraph, z_star: Matrix, m: int = 2) -> SubspaceBasis:
    """Parameter directions preserving all edge norms but not in the
    translation space: Ker(D_z*^T Bbar^T T) with the translation space and
    the zero-velocity kernel of T projected out."""
    T = t_matrix(g, z_star, m)
    K = norm_preserving_space(g, z_star, m).basis
    U = translation_space(g, z_star, m).basis
    KT = nullspace(T)
    drop = orthonormalize(np.hstack([U, KT])) if KT.shape[1] else U
    proj = K - drop @ (drop.T @ K)
    W = orthonormalize(proj)
    return SubspaceBasis(W)


def _least_neighbor_agent(g: FormationGraph) -> int:
    degs = [len(g.neighbors(i)) for i in range(1, g.n + 1)]
    return int(np.argmin(degs)) + 1  # ties broken by lowest index


def _agent_param_slots(g: FormationGraph, i: int) -> list[int]:
    """Indices into the stacked (mu; mu_tilde) vector owned by agent i."""
    E = g.n_edges
    slots = []
    for k, (a, b) in enumerate(g.edges):
        if a == i:
            slots.append(k)
        elif b == i:
            slots.append(E + k)
    return slots


def _solve_on_basis(
    basis: Matrix, slots: list[int], values: Matrix, target_check, tol: float
) -> Matrix:
    """Least-squares basis coefficients matching fixed parameter entries,
    with a residual check on the resulting velocity field."""
    coef, *_ = np.linalg.lstsq(basis[slots, :], values, rcond=None)
    v = basis @ coef
    resid = target_check(v)
    if resid > tol:
        raise DesignError(f"design infeasible: residual {resid:.3e} exceeds {tol:.1e}")
    return v


def design_translation(
    g: FormationGraph, z_star: Matrix, v_c: Matrix, m: int = 2
) -> MotionParams:
    """Parameters in the translation space giving every agent velocity v_c."""
    z_star = np.asarray(z_star, float).reshape(-1)
    v_c = np.asarray(v_c, float).reshape(-1)
    if v_c.size != m:
        raise DesignError(f"v_c must have {m} components")
    if not np.any(v_c):
        return MotionParams.zero(g.n_edges)
    i = _least_neighbor_agent(g)
    slots = _agent_param_slots(g, i)
    # edge directions available to agent i span R^m for a rigid shape
    Zi = np.column_stack([z_star.reshape(-1, m)[k % g.n_edges] for k in slots])
    ai, *_ = np.linalg.lstsq(Zi, v_c, rcond=None)
    U = translation_space(g, z_star, m)
    T = t_matrix(g, z_star, m)
    target = np.tile(v_c, g.n)
    scale = max(1.0, np.linalg.norm(target))

    def check(v):
        return np.linalg.norm(T @ v - target) / scale

    v = _solve_on_basis(U.basis, slots, ai, check, 1e-8)
    return MotionParams.from_stacked(v)


def _rotation_field(omega, pts: Matrix, center: Matrix, m: int) -> Matrix:
    """Rigid-rotation velocity field omega x (p_i - center)."""
    rel = pts - center
    if m == 2:
        w = float(omega)
        return np.column_stack([-w * rel[:, 1], w * rel[:, 0]]).reshape(-1)
    w = np.asarray(omega, float).reshape(3)
    return np.cross(np.broadcast_to(w, rel.shape), rel).reshape(-1)


def design_rotation(
    g: FormationGraph,
    z_star: Matrix,
    omega,
    center="centroid",
    m: int = 2,
    shape: DesiredShape | None = None,
) -> MotionParams:
    """Parameters whose steady velocity field is a rigid rotation about the
    centroid or about a vertex (least-squares over the admissible spans)."""
    z_star = np.asarray(z_star, float).reshape(-1)
    if shape is None:
        # reconstruct body-frame positions from z_star
        Bbar = kron_lift(incidence_matrix(g), m)
        p, *_ = np.linalg.lstsq(Bbar.T, z_star, rcond=None)
        pts = p.reshape(g.n, m)
        pts = pts - pts.mean(axis=0)
    else:
        pts = shape.positions().reshape(g.n, m)
    if center == "centroid":
        c = np.zeros(m)
    else:
        idx = int(center)
        if not (1 <= idx <= g.n):
            raise DesignError(f"rotation center vertex {center} out of range")
        c = pts[idx - 1]
    # rotation directions alone only span centroid rotations of symmetric
    # shapes; the translation space supplies the rest of the rigid field
    U = translation_space(g, z_star, m).basis
    W = rotation_space(g, z_star, m).basis
    span = np.hstack([U, W])
    field = _rotation_field(omega, pts, c, m)
    T = t_matrix(g, z_star, m)
    coef, *_ = np.linalg.lstsq(T @ span, field, rcond=None)
    v = span @ coef
    scale = max(1.0, np.linalg.norm(field))
    resid = np.linalg.norm(T @ v - field) / scale
    if resid > 1e-8:
        raise DesignError(f"rotation design infeasible: residual {resid:.3e}")
    return MotionParams.from_stacked(v)


def isosceles_rotation_direction(d1: float, d3: float) -> Matrix:
    """Closed-form rotation-space direction for an isosceles triangle with
    the two equal sides d1 = d2 and base d3 (unnormalized)."""
    r = 3 * d3**2 / (2 * d1**2 + d3**2)
    return np.array([r, 2 - r, 1.0, 2 - r, r, 1.0])


def steady_state_velocity(
    g: FormationGraph,
    params: MotionParams,
    z_star: Matrix,
    m: int = 2,
    normalized: bool = False,
) -> Matrix:
    """Abar(mu, mu_tilde) z*; in normalized mode each z*_k is replaced by its
    unit vector (the convention of the distance-error experiments)."""
    z = np.asarray(z_star, float).reshape(-1, m)
    if normalized:
        norms = np.linalg.norm(z, axis=1)
        if np.any(norms == 0):
            raise DesignError("normalized mode undefined for zero-length edge")
        z = z / norms[:, None]
    A = a_matrix(g, params)
    return (A @ z).reshape(-1)


def f_of_e(z: Matrix, params: MotionParams, g: FormationGraph, m: int = 2) -> Matrix:
    """f(e) = R(z) Abar(mu, mu_tilde) z, the motion-induced error forcing."""
    z = np.asarray(z, float).reshape(-1)
    R = rigidity_matrix(g, z, m)
    Abar = kron_lift(a_matrix(g, params), m)
    return R @ (Abar @ z)


_TRIANGLE_EDGES = ((1, 2), (2, 3), (3, 1))


def triangle_f_matrix(params: MotionParams) -> Matrix:
    """The 3x3 F with f(e) = F (e + d) / 2 for the standard triangle
    orientation (edges (1,2), (2,3), (3,1))."""
    if params.mu.size != 3:
        raise DesignError("triangle F-matrix requires exactly 3 edges")
    mu, mt = params.mu, params.mu_tilde
    return np.array(
        [
            [2 * (mu[0] - mt[0]) + mu[1] - mt[2], mu[1] + mt[2], -mu[1] - mt[2]],
            [-mu[2] - mt[0], 2 * (mu[1] - mt[1]) + mu[2] - mt[0], mu[2] + mt[0]],
            [mu[0] + mt[1], -mu[0] - mt[1], 2 * (mu[2] - mt[2]) + mu[0] - mt[1]],
        ]
    )
