"""Derived quantities from trajectory logs: speeds, headings, error norms,
centroid track, angular rates about a (possibly moving) center, and the
exponential-decay slope of the distance error."""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from .sim import TrajectoryLog

Matrix = NDArray[np.float64]


class MetricsError(ValueError):
    pass


def speeds(log: TrajectoryLog) -> Matrix:
    """(S, n) per-agent speed."""
    return np.linalg.norm(log.v, axis=2)


def headings(log: TrajectoryLog) -> Matrix:
    """(S, n) per-agent velocity heading (2D only)."""
    if log.m != 2:
        raise MetricsError("headings are defined for 2D runs")
    return np.arctan2(log.v[:, :, 1], log.v[:, :, 0])


def error_norm(log: TrajectoryLog) -> Matrix:
    return np.linalg.norm(log.e, axis=1)


def centroid(log: TrajectoryLog) -> Matrix:
    return log.p.mean(axis=1)


def angular_rate_about(
    log: TrajectoryLog, agent: int, center
) -> Matrix:
    """Angular rate (rad/s) of an agent about a center, from the unwrapped
    bearing angle of the relative position.

    ``center`` is a fixed point, an agent index (1-based, compensating a
    moving center such as the tracked target), or 'centroid'.
    """
    if log.t.size < 3:
        raise MetricsError("too few samples for angular rates")
    if log.m != 2:
        raise MetricsError("angular rates implemented for 2D runs")
    if center == "centroid":
        C = centroid(log)
    elif isinstance(center, int):
        C = log.p[:, center - 1, :]
    else:
        C = np.broadcast_to(np.asarray(center, float), (log.t.size, 2))
    rel = log.p[:, agent - 1, :] - C
    ang = np.unwrap(np.arctan2(rel[:, 1], rel[:, 0]))
    return np.gradient(ang, log.t)


def exp_decay_slope(log: TrajectoryLog, tail: float = 0.5, floor: float = 1e-13) -> float:
    """Least-squares slope of log ||e(t)|| over the final ``tail`` fraction
    of the run, ignoring samples at the numerical floor."""
    en = error_norm(log)
    start = int(log.t.size * (1 - tail))
    t, en = log.t[start:], en[start:]
    mask = en > floor
    if mask.sum() < 2:
        raise MetricsError("error already at numerical floor over the tail")
    return float(np.polyfit(t[mask], np.log(en[mask]), 1)[0])


def summary(log: TrajectoryLog) -> dict:
    """JSON-ready metric summary of one run."""
    en = error_norm(log)
    out = {
        "t_final": float(log.t[-1]),
        "e_norm_final": float(en[-1]),
        "e_norm_max": float(en.max()),
        "eo_norm_final": float(log.eo_norm[-1]),
        "ev_norm_final": float(log.ev_norm[-1]),
        "centroid_final": centroid(log)[-1].tolist(),
        "speed_final": speeds(log)[-1].tolist(),
    }
    if log.m == 2:
        out["heading_final"] = headings(log)[-1].tolist()
    try:
        out["exp_decay_slope"] = exp_decay_slope(log)
    except MetricsError:
        out["exp_decay_slope"] = None
    return out
