import json

import numpy as np
import pytest

from formctl import (
    Controller,
    MotionParams,
    Simulation,
    design_rotation,
    design_translation,
    shape_library,
)
from formctl.metrics import (
    MetricsError,
    angular_rate_about,
    centroid,
    error_norm,
    exp_decay_slope,
    headings,
    speeds,
    summary,
)
from formctl.sim import perturbed_start

TRIANGLE = shape_library("equilateral_triangle", 1.0)


def _run(shape, params, duration, p0=None, c=1.0, dt=0.01):
    ctrl = Controller(graph=shape.graph, shape=shape, params=params, c=c)
    if p0 is None:
        p0 = shape.positions().reshape(shape.graph.n, shape.m)
    return Simulation(controller=ctrl, p0=p0, dt=dt, duration=duration).run()


class TestBasics:
    def test_static_formation_is_still(self):
        log = _run(TRIANGLE, MotionParams.zero(3), 5.0)
        assert np.abs(speeds(log)).max() < 1e-9
        assert np.abs(error_norm(log)).max() < 1e-9
        drift = centroid(log) - centroid(log)[0]
        assert np.abs(drift).max() < 1e-9

    def test_translation_speed_and_heading(self):
        params = design_translation(TRIANGLE.graph, TRIANGLE.z_star, [3.0, 4.0], 2)
        log = _run(TRIANGLE, params, 5.0)
        np.testing.assert_allclose(speeds(log), 5.0, atol=1e-8)
        np.testing.assert_allclose(headings(log), np.arctan2(4.0, 3.0), atol=1e-8)

    def test_headings_require_2d(self):
        tet = shape_library("regular_tetrahedron", 1.0)
        log = _run(tet, MotionParams.zero(6), 1.0)
        with pytest.raises(MetricsError):
            headings(log)
        with pytest.raises(MetricsError):
            angular_rate_about(log, 1, "centroid")


class TestAngularRate:
    def test_designed_rotation_rate(self):
        omega = 0.7
        params = design_rotation(TRIANGLE.graph, TRIANGLE.z_star, omega, m=2)
        log = _run(TRIANGLE, params, 8.0)
        for i in range(1, 4):
            rate = angular_rate_about(log, i, "centroid")
            np.testing.assert_allclose(rate[2:-2], omega, rtol=5e-3)

    def test_center_as_agent_index(self):
        shape = shape_library("enclosing_quad", 1.0)
        params = design_rotation(shape.graph, shape.z_star, 0.5, center=1)
        log = _run(shape, params, 8.0, c=2.0)
        for i in (2, 3, 4):
            rate = angular_rate_about(log, i, 1)
            np.testing.assert_allclose(rate[2:-2], 0.5, rtol=5e-3)

    def test_too_few_samples(self):
        log = _run(TRIANGLE, MotionParams.zero(3), 0.1)
        log_short = type(log)(t=log.t[:2], p=log.p[:2], v=log.v[:2], e=log.e[:2],
                              eo_norm=log.eo_norm[:2], ev_norm=log.ev_norm[:2])
        with pytest.raises(MetricsError):
            angular_rate_about(log_short, 1, "centroid")


class TestDecaySlope:
    def test_slope_negative_from_perturbation(self):
        p0 = perturbed_start(TRIANGLE, 0.1, 41)
        log = _run(TRIANGLE, MotionParams.zero(3), 5.0, p0=p0)
        assert exp_decay_slope(log) < -0.5

    def test_floor_rejected(self):
        log = _run(TRIANGLE, MotionParams.zero(3), 5.0)
        with pytest.raises(MetricsError):
            exp_decay_slope(log)


class TestSummary:
    def test_keys_and_json_round_trip(self):
        params = design_translation(TRIANGLE.graph, TRIANGLE.z_star, [1.0, 0.0], 2)
        log = _run(TRIANGLE, params, 2.0, p0=perturbed_start(TRIANGLE, 0.05, 43))
        s = summary(log)
        assert set(s) >= {
            "t_final", "e_norm_final", "e_norm_max", "eo_norm_final",
            "ev_norm_final", "centroid_final", "speed_final", "heading_final",
            "exp_decay_slope",
        }
        assert s["t_final"] == pytest.approx(2.0)
        assert json.loads(json.dumps(s)) == s

    def test_slope_none_at_floor(self):
        log = _run(TRIANGLE, MotionParams.zero(3), 2.0)
        assert summary(log)["exp_decay_slope"] is None
