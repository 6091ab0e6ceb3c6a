"""Distance errors, potential gradients for general order l, and the
baseline gradient-descent closed loop (no motion parameters)."""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from .graphs import FormationGraph, block_diag, relative_positions
from .rigidity import DesiredShape, rigidity_matrix

Matrix = NDArray[np.float64]

# Below this fraction of d_k the l=1 unit vector is ill-defined; collision
# configurations are outside the local theory, so fail loudly.
SINGULARITY_FRACTION = 1e-9


class SingularityError(ArithmeticError):
    """An edge collapsed to (near) zero length with l < 2."""


def edge_norms(z: Matrix, m: int) -> Matrix:
    return np.linalg.norm(np.asarray(z, float).reshape(-1, m), axis=1)


def _check_singular(norms: Matrix, d: Matrix, l: int) -> None:
    if l >= 2:
        return
    bad = norms < SINGULARITY_FRACTION * d
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise SingularityError(f"edge {k + 1} collapsed (||z_k||={norms[k]:.3e}) with l={l}")


def distance_errors(z: Matrix, shape: DesiredShape) -> Matrix:
    """e_k = ||z_k||^l - d_k^l."""
    norms = edge_norms(z, shape.m)
    return norms**shape.l - shape.d**shape.l


def tilde_z(z: Matrix, d: Matrix, l: int, m: int) -> Matrix:
    """Per-edge weights ||z_k||^(l-2); all ones when l = 2."""
    norms = edge_norms(z, m)
    _check_singular(norms, np.asarray(d, float), l)
    return norms ** (l - 2)


def edge_gradient(z_k: Matrix, d_k: float, l: int) -> Matrix:
    """Gradient of the order-l quadratic edge potential along z_k:
    z_k ||z_k||^(l-2) (||z_k||^l - d_k^l)."""
    z_k = np.asarray(z_k, float)
    norm = np.linalg.norm(z_k)
    if l < 2 and norm < SINGULARITY_FRACTION * d_k:
        raise SingularityError(f"||z_k||={norm:.3e} too small for l={l}")
    return z_k * norm ** (l - 2) * (norm**l - d_k**l)


def potential(z: Matrix, shape: DesiredShape) -> float:
    """V(z) = sum_k (1/2l)(||z_k||^l - d_k^l)^2, exposed for test oracles."""
    e = distance_errors(z, shape)
    return float(np.dot(e, e)) / (2 * shape.l)


def gradient_flow_rhs(p: Matrix, shape: DesiredShape, graph: FormationGraph) -> Matrix:
    """pdot = -R(z)^T D_ztilde e, the per-agent gradient descent on V."""
    z = relative_positions(graph, p, shape.m)
    e = distance_errors(z, shape)
    w = tilde_z(z, shape.d, shape.l, shape.m)
    R = rigidity_matrix(graph, z, shape.m)
    return -R.T @ (w * e)


def error_dynamics_rhs(e: Matrix, z: Matrix, l: int, graph: FormationGraph, m: int = 2) -> Matrix:
    """edot = -l D_ztilde R(z) R(z)^T D_ztilde e."""
    e = np.asarray(e, float)
    norms = edge_norms(z, m)
    w = norms ** (l - 2)
    R = rigidity_matrix(graph, z, m)
    return -l * w * (R @ (R.T @ (w * e)))


def q_matrix(z: Matrix, l: int, graph: FormationGraph, m: int = 2) -> Matrix:
    """Q = D_ztilde R(z) R(z)^T D_ztilde; positive definite on the shape."""
    norms = edge_norms(z, m)
    w = norms ** (l - 2)
    R = rigidity_matrix(graph, z, m)
    return (w[:, None] * (R @ R.T)) * w[None, :]


def agent_gradient(p: Matrix, shape: DesiredShape, graph: FormationGraph, i: int) -> Matrix:
    """Gradient of the total potential w.r.t. agent i's position (1-based)."""
    m = shape.m
    z = relative_positions(graph, p, m).reshape(-1, m)
    g = np.zeros(m)
    for k, (a, b) in enumerate(graph.edges):
        if i not in (a, b):
            continue
        gk = edge_gradient(z[k], shape.d[k], shape.l)
        g += gk if i == a else -gk
    return g
