# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-step kernels; same contract as numpy_backend."""

import numpy as np

cimport numpy as cnp
from libc.math cimport M_PI, cos, floor, pow, sin, sqrt

cnp.import_array()

BACKEND = "cython"


def controller_fields(P, tails, heads, d, int l, mu, mu_tilde,
                      bint normalized, Py_ssize_t excluded):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] P_ = np.ascontiguousarray(P, dtype=np.float64)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] t_ = np.ascontiguousarray(tails, dtype=np.intp)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] h_ = np.ascontiguousarray(heads, dtype=np.intp)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d_ = np.ascontiguousarray(d, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] mu_ = np.ascontiguousarray(mu, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] mt_ = np.ascontiguousarray(mu_tilde, dtype=np.float64)

    cdef Py_ssize_t n = P_.shape[0]
    cdef Py_ssize_t m = P_.shape[1]
    cdef Py_ssize_t E = t_.shape[0]

    cdef cnp.ndarray[cnp.float64_t, ndim=2] z = np.empty((E, m))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] norms = np.empty(E)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] e = np.empty(E)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] G = np.zeros((n, m))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] M = np.zeros((n, m))

    cdef Py_ssize_t k, j, ti, hi
    cdef double nrm, w, ek, s, g, zm

    for k in range(E):
        ti = t_[k]
        hi = h_[k]
        s = 0.0
        for j in range(m):
            z[k, j] = P_[ti, j] - P_[hi, j]
            s += z[k, j] * z[k, j]
        nrm = sqrt(s)
        norms[k] = nrm
        if (l < 2 or normalized) and nrm < 1e-9 * d_[k]:
            raise ValueError(f"edge {k + 1} collapsed: ||z_k||={nrm:.3e}")
        if l == 2:
            w = 1.0
            ek = s - d_[k] * d_[k]
        elif l == 1:
            w = 1.0 / nrm
            ek = nrm - d_[k]
        else:
            w = pow(nrm, l - 2)
            ek = pow(nrm, l) - pow(d_[k], l)
        e[k] = ek
        for j in range(m):
            g = w * ek * z[k, j]
            if ti != excluded:
                G[ti, j] += g
            if hi != excluded:
                G[hi, j] -= g
            zm = z[k, j] / nrm if normalized else z[k, j]
            M[ti, j] += mu_[k] * zm
            M[hi, j] += mt_[k] * zm
    return z, norms, e, G, M


cdef int _control(double[:, ::1] P, double[:, ::1] u,
                  cnp.intp_t[::1] tails, cnp.intp_t[::1] heads,
                  double[::1] d, int l, double[::1] mu, double[::1] mt,
                  bint normalized, Py_ssize_t excluded, double c,
                  int kind, double[::1] z1s, double[:, ::1] vh,
                  Py_ssize_t n, Py_ssize_t m) except -1:
    """u = -c G + M (+ heading/estimator extras) evaluated in place."""
    cdef Py_ssize_t k, j, ti, hi, i
    cdef double s, nrm, w, ek, g, zm, zkj, eo

    for i in range(n):
        for j in range(m):
            u[i, j] = 0.0
    for k in range(tails.shape[0]):
        ti = tails[k]
        hi = heads[k]
        s = 0.0
        for j in range(m):
            zkj = P[ti, j] - P[hi, j]
            s += zkj * zkj
        nrm = sqrt(s)
        if (l < 2 or normalized) and nrm < 1e-9 * d[k]:
            raise ValueError(f"edge {k + 1} collapsed: ||z_k||={nrm:.3e}")
        if l == 2:
            w = 1.0
            ek = s - d[k] * d[k]
        elif l == 1:
            w = 1.0 / nrm
            ek = nrm - d[k]
        else:
            w = pow(nrm, l - 2)
            ek = pow(nrm, l) - pow(d[k], l)
        for j in range(m):
            zkj = P[ti, j] - P[hi, j]
            g = c * w * ek * zkj
            if ti != excluded:
                u[ti, j] -= g
            if hi != excluded:
                u[hi, j] += g
            zm = zkj / nrm if normalized else zkj
            u[ti, j] += mu[k] * zm
            u[hi, j] += mt[k] * zm
    if kind == 1:
        # orientation term on edge 1 = (1, 2)
        for j in range(m):
            eo = (P[0, j] - P[1, j]) - z1s[j]
            u[0, j] -= c * eo
            u[1, j] += c * eo
    elif kind == 2:
        for i in range(n):
            if i == excluded:
                for j in range(m):
                    u[i, j] = vh[i, j]
            else:
                for j in range(m):
                    u[i, j] += vh[i, j]
    return 0


cdef int _estimator(double[:, ::1] P, double[:, ::1] vd,
                    cnp.intp_t[::1] tails, cnp.intp_t[::1] heads,
                    double[::1] d, int l, Py_ssize_t excluded, double kappa,
                    Py_ssize_t n, Py_ssize_t m) except -1:
    """vd = -kappa Bbar_d D_ztilde D_z e in place."""
    cdef Py_ssize_t k, j, ti, hi, i
    cdef double s, nrm, w, ek, g, zkj

    for i in range(n):
        for j in range(m):
            vd[i, j] = 0.0
    for k in range(tails.shape[0]):
        ti = tails[k]
        hi = heads[k]
        s = 0.0
        for j in range(m):
            zkj = P[ti, j] - P[hi, j]
            s += zkj * zkj
        nrm = sqrt(s)
        if l < 2 and nrm < 1e-9 * d[k]:
            raise ValueError(f"edge {k + 1} collapsed: ||z_k||={nrm:.3e}")
        if l == 2:
            w = 1.0
            ek = s - d[k] * d[k]
        elif l == 1:
            w = 1.0 / nrm
            ek = nrm - d[k]
        else:
            w = pow(nrm, l - 2)
            ek = pow(nrm, l) - pow(d[k], l)
        for j in range(m):
            zkj = P[ti, j] - P[hi, j]
            g = kappa * w * ek * zkj
            if ti != excluded:
                vd[ti, j] -= g
            if hi != excluded:
                vd[hi, j] += g
    return 0


cdef inline double _clip(double x, double lim) nogil:
    if lim < 0:
        return x
    if x > lim:
        return lim
    if x < -lim:
        return -lim
    return x


cdef inline double _wrap(double a) nogil:
    a = a - 2.0 * M_PI * floor((a + M_PI) / (2.0 * M_PI))
    return a


cdef int _rhs(double[::1] state, double[::1] out,
              double[:, ::1] P, double[:, ::1] u, double[:, ::1] vh,
              double[:, ::1] vd,
              cnp.intp_t[::1] tails, cnp.intp_t[::1] heads,
              double[::1] d, int l, double[::1] mu, double[::1] mt,
              bint normalized, Py_ssize_t excluded, double c,
              int kind, double[::1] z1s, bint unicycle, double ell,
              double sat_v, double sat_omega, double kappa,
              Py_ssize_t n, Py_ssize_t m) except -1:
    cdef Py_ssize_t i, j
    cdef double th, ct, st, v, om

    if unicycle:
        for i in range(n):
            th = state[3 * i + 2]
            P[i, 0] = state[3 * i] + ell * cos(th)
            P[i, 1] = state[3 * i + 1] + ell * sin(th)
        _control(P, u, tails, heads, d, l, mu, mt, normalized, excluded,
                 c, kind, z1s, vh, n, m)
        for i in range(n):
            th = state[3 * i + 2]
            ct = cos(th)
            st = sin(th)
            v = _clip(ct * u[i, 0] + st * u[i, 1], sat_v)
            om = _clip((-st * u[i, 0] + ct * u[i, 1]) / ell, sat_omega)
            out[3 * i] = v * ct
            out[3 * i + 1] = v * st
            out[3 * i + 2] = om
        return 0
    for i in range(n):
        for j in range(m):
            P[i, j] = state[m * i + j]
    if kind == 2:
        for i in range(n):
            for j in range(m):
                vh[i, j] = state[n * m + m * i + j]
    _control(P, u, tails, heads, d, l, mu, mt, normalized, excluded,
             c, kind, z1s, vh, n, m)
    for i in range(n):
        for j in range(m):
            out[m * i + j] = u[i, j]
    if kind == 2:
        _estimator(P, vd, tails, heads, d, l, excluded, kappa, n, m)
        for i in range(n):
            for j in range(m):
                out[n * m + m * i + j] = 0.0 if i == excluded else vd[i, j]
    return 0


def rk4_chunk(state0, tails, heads, d, int l, mu, mu_tilde, bint normalized,
              Py_ssize_t excluded, double c, int kind, z1_star,
              bint unicycle, double ell, double sat_v, double sat_omega,
              double kappa, Py_ssize_t ev_agent, Py_ssize_t ev_axis,
              double ev_threshold, int ev_direction, new_z1_star,
              bint ev_fired, double dt, Py_ssize_t steps,
              Py_ssize_t n, Py_ssize_t m):
    """Advance `steps` RK4 steps of the selected closed loop entirely in C.

    kind: 0 formation, 1 heading, 2 enclosing. Event (heading only): before
    each step, if coordinate `ev_axis` of agent `ev_agent` (handle point for
    unicycles) crosses `ev_threshold` in `ev_direction` (+1 ge, -1 le) and
    the event has not fired, z1_star is replaced by new_z1_star.

    Returns (state, z1_star, ev_fired).
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s_ = np.array(state0, dtype=np.float64)
    cdef cnp.intp_t[::1] t_ = np.ascontiguousarray(tails, dtype=np.intp)
    cdef cnp.intp_t[::1] h_ = np.ascontiguousarray(heads, dtype=np.intp)
    cdef double[::1] d_ = np.ascontiguousarray(d, dtype=np.float64)
    cdef double[::1] mu_ = np.ascontiguousarray(mu, dtype=np.float64)
    cdef double[::1] mt_ = np.ascontiguousarray(mu_tilde, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z1s = (
        np.array(z1_star, dtype=np.float64) if z1_star is not None
        else np.zeros(m)
    )
    cdef double[::1] nz1 = (
        np.ascontiguousarray(new_z1_star, dtype=np.float64)
        if new_z1_star is not None else np.zeros(m)
    )

    cdef Py_ssize_t dim = s_.shape[0]
    cdef double[::1] state = s_
    cdef double[::1] k1 = np.empty(dim)
    cdef double[::1] k2 = np.empty(dim)
    cdef double[::1] k3 = np.empty(dim)
    cdef double[::1] k4 = np.empty(dim)
    cdef double[::1] tmp = np.empty(dim)
    cdef double[:, ::1] P = np.empty((n, m))
    cdef double[:, ::1] u = np.empty((n, m))
    cdef double[:, ::1] vh = np.zeros((n, m))
    cdef double[:, ::1] vd = np.zeros((n, m))
    cdef double[::1] z1v = z1s

    cdef Py_ssize_t step, i
    cdef double coord, h6 = dt / 6.0

    for step in range(steps):
        if kind == 1 and ev_agent >= 0 and not ev_fired:
            if unicycle:
                coord = state[3 * ev_agent + ev_axis]
                if ev_axis == 0:
                    coord += ell * cos(state[3 * ev_agent + 2])
                else:
                    coord += ell * sin(state[3 * ev_agent + 2])
            else:
                coord = state[m * ev_agent + ev_axis]
            if (ev_direction > 0 and coord >= ev_threshold) or (
                ev_direction < 0 and coord <= ev_threshold
            ):
                ev_fired = True
                for i in range(m):
                    z1v[i] = nz1[i]
        _rhs(state, k1, P, u, vh, vd, t_, h_, d_, l, mu_, mt_, normalized,
             excluded, c, kind, z1v, unicycle, ell, sat_v, sat_omega, kappa, n, m)
        for i in range(dim):
            tmp[i] = state[i] + 0.5 * dt * k1[i]
        _rhs(tmp, k2, P, u, vh, vd, t_, h_, d_, l, mu_, mt_, normalized,
             excluded, c, kind, z1v, unicycle, ell, sat_v, sat_omega, kappa, n, m)
        for i in range(dim):
            tmp[i] = state[i] + 0.5 * dt * k2[i]
        _rhs(tmp, k3, P, u, vh, vd, t_, h_, d_, l, mu_, mt_, normalized,
             excluded, c, kind, z1v, unicycle, ell, sat_v, sat_omega, kappa, n, m)
        for i in range(dim):
            tmp[i] = state[i] + dt * k3[i]
        _rhs(tmp, k4, P, u, vh, vd, t_, h_, d_, l, mu_, mt_, normalized,
             excluded, c, kind, z1v, unicycle, ell, sat_v, sat_omega, kappa, n, m)
        for i in range(dim):
            state[i] = state[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if unicycle:
            for i in range(n):
                state[3 * i + 2] = _wrap(state[3 * i + 2])
    return s_, z1s, ev_fired
