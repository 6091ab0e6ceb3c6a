"""Deterministic fixed-step simulation of the closed-loop formation systems.

Classical RK4 at a fixed dt; events applied at step boundaries; identical
configuration and seed give bit-identical logs.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from ._kernels import controller_fields, rk4_chunk
from .graphs import FormationGraph
from .maneuver import (
    ConfigurationError,
    EscapeMonitor,
    EstimatorState,
    HeadingTarget,
)
from .motion import MotionParams, a_matrix
from .rigidity import DesiredShape

Matrix = NDArray[np.float64]


class SimulationAbort(RuntimeError):
    """Controller singularity; carries the state at the time of failure."""

    def __init__(self, message: str, t: float, state: Matrix):
        super().__init__(f"{message} at t={t:.4f}")
        self.t = t
        self.state = state


@dataclass
class LocalFrame:
    """Per-agent coordinate frame: proper rotation plus offset."""

    rotation: Matrix
    offset: Matrix

    def __post_init__(self):
        R = np.asarray(self.rotation, float)
        if np.abs(R @ R.T - np.eye(R.shape[0])).max() > 1e-10 or np.linalg.det(R) < 0:
            raise ConfigurationError("frame rotation must be orthogonal with det +1")
        self.rotation = R
        self.offset = np.asarray(self.offset, float).reshape(-1)


def random_frames(n: int, m: int, seed: int) -> list[LocalFrame]:
    """Seeded random proper-rotation frames, one per agent."""
    rng = np.random.default_rng(seed)
    frames = []
    for _ in range(n):
        if m == 2:
            a = rng.uniform(-np.pi, np.pi)
            R = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
        else:
            Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
            if np.linalg.det(Q) < 0:
                Q[:, 0] = -Q[:, 0]
            R = Q
        frames.append(LocalFrame(R, rng.uniform(-1, 1, m)))
    return frames


def feedback_linearize(
    theta: float,
    u_ref: Matrix,
    ell: float,
    sat_v: float | None = None,
    sat_omega: float | None = None,
) -> tuple[float, float]:
    """Unicycle inputs (v, omega) making the handle point at distance ell
    ahead of the axle track u_ref exactly (when unsaturated)."""
    if ell <= 0:
        raise ConfigurationError(f"handle distance must be positive, got {ell}")
    ct, st = np.cos(theta), np.sin(theta)
    v = ct * u_ref[0] + st * u_ref[1]
    omega = (-st * u_ref[0] + ct * u_ref[1]) / ell
    if sat_v is not None:
        v = float(np.clip(v, -sat_v, sat_v))
    if sat_omega is not None:
        omega = float(np.clip(omega, -sat_omega, sat_omega))
    return float(v), float(omega)


@dataclass
class Controller:
    """Closed-loop right-hand side builder for one scenario.

    kind: 'formation' (gradient + optional motion parameters),
    'heading' (adds the orientation term on edge 1) or 'enclosing'
    (masked gradient, estimators, free target).
    """

    graph: FormationGraph
    shape: DesiredShape
    params: MotionParams
    c: float = 1.0
    kind: str = "formation"
    normalized: bool = False
    heading: HeadingTarget | None = None
    target: int = 1
    kappa: float = 0.0
    frames: list[LocalFrame] | None = None

    def __post_init__(self):
        if self.kind not in ("formation", "heading", "enclosing"):
            raise ConfigurationError(f"unknown controller kind {self.kind!r}")
        if self.kind == "heading" and self.heading is None:
            raise ConfigurationError("heading controller needs a HeadingTarget")
        if self.kind == "enclosing":
            A = a_matrix(self.graph, self.params)
            if np.any(A[self.target - 1, :] != 0.0):
                raise ConfigurationError("motion parameters touch the target row")
        self._tails, self._heads = self.graph.tails_heads()

    def _raw_control(self, P: Matrix, v_hat: Matrix | None) -> tuple[Matrix, Matrix]:
        """Global-frame control field and per-edge errors."""
        excluded = self.target - 1 if self.kind == "enclosing" else -1
        z, norms, e, G, M = controller_fields(
            P, self._tails, self._heads, self.shape.d, self.shape.l,
            self.params.mu, self.params.mu_tilde, self.normalized, excluded,
        )
        u = -self.c * G + M
        if self.kind == "heading":
            e1o = z[0] - self.heading.z1_star
            u[0] -= self.c * e1o
            u[1] += self.c * e1o
        if v_hat is not None:
            u = u + v_hat
        return u, e

    def control(self, P: Matrix, v_hat: Matrix | None = None) -> tuple[Matrix, Matrix]:
        """Control field (n, m); evaluated through per-agent local frames
        when frames are configured, which must not change the result."""
        if self.frames is None:
            return self._raw_control(P, v_hat)
        n, m = P.shape
        u = np.empty_like(P)
        e = None
        for i, fr in enumerate(self.frames):
            R = fr.rotation
            P_i = (P - fr.offset) @ R  # rows are R^T (p_j - w_i)
            vh_i = None
            if v_hat is not None:
                vh_i = v_hat @ R
            ctrl = self
            if self.kind == "heading":
                local_target = HeadingTarget(R.T @ self.heading.z1_star)
                ctrl = Controller(
                    self.graph, self.shape, self.params, self.c, self.kind,
                    self.normalized, local_target, self.target, self.kappa,
                )
            u_i, e_i = ctrl._raw_control(P_i, vh_i)
            u[i] = R @ u_i[i]
            if e is None:
                e = e_i
        return u, e

    def estimator_dot(self, P: Matrix) -> Matrix:
        """v_hat_dot = -kappa Bbar_d D_ztilde D_z e (target row zero)."""
        zero = np.zeros(self.graph.n_edges)
        _, _, _, G, _ = controller_fields(
            P, self._tails, self._heads, self.shape.d, self.shape.l,
            zero, zero, False, self.target - 1,
        )
        return -self.kappa * G


@dataclass
class TrajectoryLog:
    """Sampled trajectory with per-edge errors and auxiliary error norms."""

    t: Matrix
    p: Matrix  # (S, n, m)
    v: Matrix  # (S, n, m)
    e: Matrix  # (S, E)
    eo_norm: Matrix  # (S,)
    ev_norm: Matrix  # (S,)
    theta: Matrix | None = None  # (S, n) for unicycle runs
    dt: float = 0.0

    @property
    def n(self) -> int:
        return self.p.shape[1]

    @property
    def m(self) -> int:
        return self.p.shape[2]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        coords = ["x", "y", "z"][: self.m]
        w.writerow(["t", "agent"] + coords + [f"v{c}" for c in coords]
                   + ["e_norm", "eo_norm", "ev_norm"])
        for s in range(self.t.size):
            en = np.linalg.norm(self.e[s])
            for i in range(self.n):
                w.writerow(
                    [f"{self.t[s]:.6f}", i + 1]
                    + [f"{x:.12g}" for x in self.p[s, i]]
                    + [f"{x:.12g}" for x in self.v[s, i]]
                    + [f"{en:.12g}", f"{self.eo_norm[s]:.12g}", f"{self.ev_norm[s]:.12g}"]
                )
        return buf.getvalue()


@dataclass
class Event:
    """Heading-switch trigger: when an agent coordinate crosses a line,
    replace z1_star. Evaluated at step boundaries, at most once."""

    agent: int
    axis: int
    threshold: float
    direction: str  # 'ge' | 'le'
    new_z1_star: Matrix
    fired: bool = False

    def check(self, P: Matrix) -> bool:
        if self.fired:
            return False
        x = P[self.agent - 1, self.axis]
        hit = x >= self.threshold if self.direction == "ge" else x <= self.threshold
        if hit:
            self.fired = True
        return hit


@dataclass
class UnicycleModel:
    ell: float
    sat_v: float | None = None
    sat_omega: float | None = None


def _wrap_angle(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


@dataclass
class Simulation:
    """One deterministic run: controller + agent model + events + logging."""

    controller: Controller
    p0: Matrix  # initial reference-point positions (n, m)
    dt: float = 0.01
    duration: float = 10.0
    sample_every: int = 10
    events: list[Event] = field(default_factory=list)
    unicycle: UnicycleModel | None = None
    theta0: Matrix | None = None
    target_velocity: Matrix | None = None  # enclosing: true (constant) velocity
    v_hat0: Matrix | None = None
    escape_monitor: EscapeMonitor | None = None

    def run(self) -> TrajectoryLog:
        if self.dt <= 0 or self.duration <= 0:
            raise ConfigurationError("dt and duration must be positive")
        ctrl = self.controller
        n, m = ctrl.graph.n, ctrl.shape.m
        P = np.asarray(self.p0, float).reshape(n, m).copy()
        enclosing = ctrl.kind == "enclosing"
        if self.unicycle is not None:
            if m != 2:
                raise ConfigurationError("unicycle model is 2D only")
            if enclosing:
                raise ConfigurationError("unicycle model not supported for enclosing runs")
            theta = (np.zeros(n) if self.theta0 is None
                     else np.asarray(self.theta0, float).copy())
        v_hat = None
        if enclosing:
            v_hat = (np.zeros((n, m)) if self.v_hat0 is None
                     else np.asarray(self.v_hat0, float).reshape(n, m).copy())
            if self.target_velocity is None:
                raise ConfigurationError("enclosing run needs a target velocity")
            v_hat[ctrl.target - 1] = np.asarray(self.target_velocity, float)

        n_steps = int(round(self.duration / self.dt))
        samples = n_steps // self.sample_every + 1
        log_t = np.empty(samples)
        log_p = np.empty((samples, n, m))
        log_v = np.empty((samples, n, m))
        log_e = np.empty((samples, ctrl.graph.n_edges))
        log_eo = np.zeros(samples)
        log_ev = np.zeros(samples)
        log_th = np.empty((samples, n)) if self.unicycle is not None else None

        prev_vel_angle = None
        prev_t = 0.0

        def deriv(state):
            if self.unicycle is not None:
                poses = state.reshape(n, 3)
                th = poses[:, 2]
                ell = self.unicycle.ell
                Q = poses[:, :2] + ell * np.column_stack([np.cos(th), np.sin(th)])
                u_ref, _ = ctrl.control(Q)
                d = np.empty((n, 3))
                for i in range(n):
                    v, w = feedback_linearize(
                        th[i], u_ref[i], ell, self.unicycle.sat_v, self.unicycle.sat_omega
                    )
                    d[i] = (v * np.cos(th[i]), v * np.sin(th[i]), w)
                return d.reshape(-1)
            if enclosing:
                Pc = state[: n * m].reshape(n, m)
                vh = state[n * m :].reshape(n, m)
                u, _ = ctrl.control(Pc, vh)
                u[ctrl.target - 1] = vh[ctrl.target - 1]
                vd = ctrl.estimator_dot(Pc)
                return np.concatenate([u.reshape(-1), vd.reshape(-1)])
            u, _ = ctrl.control(state.reshape(n, m))
            return u.reshape(-1)

        def observables(state):
            """(positions, velocities, errors, theta) at the current state."""
            if self.unicycle is not None:
                poses = state.reshape(n, 3)
                th = poses[:, 2]
                ell = self.unicycle.ell
                Q = poses[:, :2] + ell * np.column_stack([np.cos(th), np.sin(th)])
                u_ref, e = ctrl.control(Q)
                V = np.empty((n, 2))
                for i in range(n):
                    v, w = feedback_linearize(
                        th[i], u_ref[i], ell, self.unicycle.sat_v, self.unicycle.sat_omega
                    )
                    ct, st = np.cos(th[i]), np.sin(th[i])
                    V[i] = (v * ct - ell * w * st, v * st + ell * w * ct)
                return Q, V, e, th
            if enclosing:
                Pc = state[: n * m].reshape(n, m)
                vh = state[n * m :].reshape(n, m)
                u, e = ctrl.control(Pc, vh)
                u[ctrl.target - 1] = vh[ctrl.target - 1]
                return Pc, u, e, None
            Pc = state.reshape(n, m)
            u, e = ctrl.control(Pc)
            return Pc, u, e, None

        if self.unicycle is not None:
            state = np.column_stack([P, theta]).reshape(-1)
        elif enclosing:
            state = np.concatenate([P.reshape(-1), v_hat.reshape(-1)])
        else:
            state = P.reshape(-1)

        # the compiled chunk stepper handles the preset scenarios; per-agent
        # frames and multi-event runs take the per-step reference loop
        fast = rk4_chunk is not None and ctrl.frames is None and len(self.events) <= 1
        kind_code = {"formation": 0, "heading": 1, "enclosing": 2}[ctrl.kind]
        tails, heads = ctrl.graph.tails_heads()

        sample = 0
        t = 0.0
        step = 0
        while True:
            # step-boundary bookkeeping: events, sampling, escape monitor
            try:
                Pc, V, e, th = observables(state)
            except ValueError as exc:
                raise SimulationAbort(str(exc), t, state) from exc
            for ev in self.events:
                if ctrl.kind == "heading" and ev.check(Pc):
                    ctrl.heading = HeadingTarget(ev.new_z1_star)
            if step % self.sample_every == 0:
                log_t[sample] = t
                log_p[sample] = Pc
                log_v[sample] = V
                log_e[sample] = e
                if ctrl.kind == "heading":
                    log_eo[sample] = np.linalg.norm(
                        (Pc[0] - Pc[1]) - ctrl.heading.z1_star
                    )
                if enclosing:
                    vh = state[n * m :].reshape(n, m)
                    ev_vec = vh - vh[ctrl.target - 1]
                    log_ev[sample] = np.linalg.norm(ev_vec)
                if log_th is not None:
                    log_th[sample] = _wrap_angle(th)
                # escape-reset heuristic operates on sampled angular rates
                if enclosing and self.escape_monitor is not None:
                    pursuers = [i for i in range(n) if i != ctrl.target - 1]
                    ang = np.arctan2(V[pursuers, 1], V[pursuers, 0])
                    if prev_vel_angle is not None and t > prev_t:
                        rates = _wrap_angle(ang - prev_vel_angle) / (t - prev_t)
                        if self.escape_monitor.observe(
                            t, np.abs(rates), np.linalg.norm(e),
                            np.linalg.norm(ctrl.shape.d ** ctrl.shape.l),
                        ):
                            vh = state[n * m :].reshape(n, m)
                            for i in pursuers:
                                vh[i] = V[i]
                            state[n * m :] = vh.reshape(-1)
                    prev_vel_angle = ang
                    prev_t = t
                sample += 1
            if step == n_steps:
                break
            if fast:
                chunk = min(self.sample_every - step % self.sample_every,
                            n_steps - step)
                ev = self.events[0] if self.events else None
                uni = self.unicycle
                try:
                    state, z1s, fired = rk4_chunk(
                        state, tails, heads, ctrl.shape.d, ctrl.shape.l,
                        ctrl.params.mu, ctrl.params.mu_tilde, ctrl.normalized,
                        ctrl.target - 1 if enclosing else -1, ctrl.c, kind_code,
                        ctrl.heading.z1_star if ctrl.heading else None,
                        uni is not None, uni.ell if uni else 0.0,
                        uni.sat_v if uni and uni.sat_v is not None else -1.0,
                        uni.sat_omega if uni and uni.sat_omega is not None else -1.0,
                        ctrl.kappa,
                        ev.agent - 1 if ev else -1, ev.axis if ev else 0,
                        ev.threshold if ev else 0.0,
                        (1 if ev.direction == "ge" else -1) if ev else 1,
                        ev.new_z1_star if ev else None,
                        ev.fired if ev else True, self.dt, chunk, n, m,
                    )
                except ValueError as exc:
                    raise SimulationAbort(str(exc), t, state) from exc
                if ev is not None and fired and not ev.fired:
                    ev.fired = True
                    ctrl.heading = HeadingTarget(z1s)
                step += chunk
            else:
                # classical RK4 step
                try:
                    k1 = deriv(state)
                    k2 = deriv(state + 0.5 * self.dt * k1)
                    k3 = deriv(state + 0.5 * self.dt * k2)
                    k4 = deriv(state + self.dt * k3)
                except ValueError as exc:
                    raise SimulationAbort(str(exc), t, state) from exc
                state = state + (self.dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                if self.unicycle is not None:
                    poses = state.reshape(n, 3)
                    poses[:, 2] = _wrap_angle(poses[:, 2])
                step += 1
            t = step * self.dt

        return TrajectoryLog(
            t=log_t[:sample], p=log_p[:sample], v=log_v[:sample], e=log_e[:sample],
            eo_norm=log_eo[:sample], ev_norm=log_ev[:sample],
            theta=log_th[:sample] if log_th is not None else None, dt=self.dt,
        )


def perturbed_start(
    shape: DesiredShape, radius: float, seed: int, offset=None
) -> Matrix:
    """Reference positions displaced by a seeded uniform perturbation."""
    rng = np.random.default_rng(seed)
    pts = shape.positions().reshape(-1, shape.m)
    if offset is not None:
        pts = pts + np.asarray(offset, float)
    return pts + rng.uniform(-radius, radius, pts.shape)
