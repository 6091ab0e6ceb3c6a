"""Pure-numpy implementation of the hot per-step kernels.

The compiled extension in ``_speedups.pyx`` implements the same contract;
``formctl._kernels`` picks whichever is available at import time.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def controller_fields(P, tails, heads, d, l, mu, mu_tilde, normalized, excluded):
    """Per-edge geometry plus the two accumulated vertex fields.

    Returns (z, norms, e, G, M) where for each vertex i

        G_i = sum_k b_ik ||z_k||^(l-2) e_k z_k   (gradient field, row
              ``excluded`` skipped when >= 0, as with the masked incidence)
        M_i = sum_k a_ik zm_k                    (motion field; zm_k is z_k,
              or its unit vector in normalized mode)

    Raises ValueError when an edge collapses with l < 2 (unit vector
    undefined) or in normalized mode.
    """
    P = np.asarray(P, float)
    n, m = P.shape
    z = P[tails] - P[heads]
    norms = np.linalg.norm(z, axis=1)
    if (l < 2 or normalized) and np.any(norms < 1e-9 * d):
        k = int(np.argmin(norms / d))
        raise ValueError(f"edge {k + 1} collapsed: ||z_k||={norms[k]:.3e}")
    w = norms ** (l - 2) if l != 2 else np.ones_like(norms)
    e = norms**l - d**l
    gk = (w * e)[:, None] * z
    G = np.zeros((n, m))
    if excluded >= 0:
        keep_t = tails != excluded
        keep_h = heads != excluded
        np.add.at(G, tails[keep_t], gk[keep_t])
        np.subtract.at(G, heads[keep_h], gk[keep_h])
    else:
        np.add.at(G, tails, gk)
        np.subtract.at(G, heads, gk)
    zm = z / norms[:, None] if normalized else z
    M = np.zeros((n, m))
    np.add.at(M, tails, mu[:, None] * zm)
    np.add.at(M, heads, mu_tilde[:, None] * zm)
    return z, norms, e, G, M
