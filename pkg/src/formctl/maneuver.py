"""Application controllers: heading-controlled translation and target
enclosing/tracking with per-agent velocity estimators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from ._kernels import controller_fields
from .graphs import FormationGraph
from .motion import MotionParams, a_matrix
from .rigidity import DesiredShape

Matrix = NDArray[np.float64]


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class HeadingTarget:
    """Desired global-frame value of z_1 (the orientation edge (1, 2))."""

    z1_star: Matrix

    def __post_init__(self):
        object.__setattr__(self, "z1_star", np.asarray(self.z1_star, float).reshape(-1))


@dataclass
class EstimatorState:
    """Per-agent target-velocity estimates; the target's own slot holds its
    true (constant) velocity and is never updated."""

    v_hat: Matrix
    kappa: float
    target: int = 1

    def __post_init__(self):
        self.v_hat = np.asarray(self.v_hat, float).copy()
        if self.kappa <= 0:
            raise ConfigurationError(f"kappa must be positive, got {self.kappa}")


def _fields(p, shape: DesiredShape, graph: FormationGraph, params: MotionParams,
            normalized: bool, excluded: int = -1):
    P = np.asarray(p, float).reshape(graph.n, shape.m)
    tails, heads = graph.tails_heads()
    return P, controller_fields(
        P, tails, heads, shape.d, shape.l, params.mu, params.mu_tilde,
        normalized, excluded,
    )


def heading_control_rhs(
    p: Matrix,
    shape: DesiredShape,
    graph: FormationGraph,
    params: MotionParams,
    target: HeadingTarget,
    c: float,
    normalized: bool = False,
) -> Matrix:
    """u = c(-R^T D_ztilde e - Bbar_a e_o) + Abar z.

    Only agents 1 and 2 receive the orientation term; the motion parameters
    must define a pure translation for the convergence result to apply.
    """
    if c <= 0:
        raise ConfigurationError(f"gain c must be positive, got {c}")
    if not graph.edges or graph.edges[0] != (1, 2):
        raise ConfigurationError("heading control requires edge 1 to be (1, 2)")
    P, (z, norms, e, G, M) = _fields(p, shape, graph, params, normalized)
    u = -c * G + M
    e1o = z[0] - target.z1_star
    u[0] -= c * e1o
    u[1] += c * e1o
    return u.reshape(-1)


def enclosing_control_rhs(
    p: Matrix,
    shape: DesiredShape,
    graph: FormationGraph,
    params: MotionParams,
    est: EstimatorState,
    c: float,
    normalized: bool = False,
) -> Matrix:
    """u = -c Bbar_d D_ztilde D_z e + Abar z + v_hat.

    The target (vertex ``est.target``) receives neither gradient nor motion
    terms; its dynamics reduce to its own constant velocity.
    """
    if c <= 0:
        raise ConfigurationError(f"gain c must be positive, got {c}")
    A = a_matrix(graph, params)
    if np.any(A[est.target - 1, :] != 0.0):
        raise ConfigurationError(
            f"motion parameters touch the target row (vertex {est.target})"
        )
    P, (z, norms, e, G, M) = _fields(
        p, shape, graph, params, normalized, excluded=est.target - 1
    )
    u = -c * G + M + est.v_hat.reshape(graph.n, shape.m)
    return u.reshape(-1)


def estimator_rhs(
    p: Matrix,
    shape: DesiredShape,
    graph: FormationGraph,
    est: EstimatorState,
) -> Matrix:
    """v_hat_dot = -kappa Bbar_d D_ztilde D_z e; target slot is identically 0."""
    zero = MotionParams.zero(graph.n_edges)
    _, (z, norms, e, G, M) = _fields(
        p, shape, graph, zero, False, excluded=est.target - 1
    )
    return (-est.kappa * G).reshape(-1)


def validate_assumption_T(
    graph: FormationGraph, shape: DesiredShape, params: MotionParams
) -> dict:
    """Advisory check of the complete-subgraph sufficient condition for the
    heading controller (the square experiment deliberately violates it)."""
    m = shape.m
    H = [1, 2, 3] if m == 2 else [1, 2, 3, 4]
    Hset = set(H)
    present = {frozenset(e) for e in graph.edges}
    complete = all(
        frozenset((a, b)) in present for ai, a in enumerate(H) for b in H[ai + 1 :]
    )
    pts = shape.positions().reshape(graph.n, m)
    rel = pts[[h - 1 for h in H[1:]]] - pts[H[0] - 1]
    nondegenerate = np.linalg.matrix_rank(rel, tol=1e-9 * max(1.0, np.abs(rel).max())) == m
    # parameters of the agents in H may only live on edges inside the subgraph
    params_within = True
    for k, (a, b) in enumerate(graph.edges):
        inside = frozenset((a, b)) <= Hset
        if a in Hset and not inside and params.mu[k] != 0:
            params_within = False
        if b in Hset and not inside and params.mu_tilde[k] != 0:
            params_within = False
    # residual of Bbar_a^T Abar z at the reference shape
    A = a_matrix(graph, params)
    vel = A @ shape.z_star.reshape(-1, m)
    residual = float(np.linalg.norm(vel[0] - vel[1]))
    return {
        "complete_subgraph": complete,
        "nondegenerate": bool(nondegenerate),
        "params_within_subgraph": params_within,
        "ba_residual_at_shape": residual,
        "satisfied": complete and bool(nondegenerate) and params_within,
    }


@dataclass
class EscapeMonitor:
    """Detects convergence toward the undesired common-translation steady
    motion of the enclosing system and emits an estimator reset.

    Fires when every pursuer's measured angular rate stays below
    ``threshold_omega`` for ``window`` seconds while the distance error is
    already small; the reset assigns each pursuer's current control input as
    its new velocity estimate.
    """

    threshold_omega: float = 1e-3
    window: float = 5.0
    error_fraction: float = 1e-2
    _quiet_since: float | None = field(default=None, repr=False)
    fired: bool = field(default=False, repr=False)

    def observe(self, t: float, omega_abs: Matrix, e_norm: float, d_norm: float) -> bool:
        """Returns True when a reset should fire at time t."""
        if self.fired:
            return False
        quiet = np.all(np.abs(omega_abs) < self.threshold_omega) and (
            e_norm < self.error_fraction * d_norm
        )
        if not quiet:
            self._quiet_since = None
            return False
        if self._quiet_since is None:
            self._quiet_since = t
            return False
        if t - self._quiet_since >= self.window:
            self.fired = True
            return True
        return False
