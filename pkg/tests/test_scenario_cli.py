import copy
import json

import numpy as np
import pytest

from formctl.cli import main
from formctl.scenario import (
    PRESETS,
    SchemaError,
    build_simulation,
    load_scenario,
    load_scenario_file,
    preset,
)

TRIANGLE_CFG = {
    "name": "triangle-translate",
    "graph": {"n": 3, "edges": [[1, 2], [2, 3], [3, 1]]},
    "shape": {"library": "equilateral_triangle", "scale": 1.0},
    "control": {"l": 2, "c": 1.0},
    "motion": {"translation": [0.5, 0.0]},
    "agents": {"seed": 3, "radius": 0.1},
    "sim": {"dt": 0.01, "duration": 2.0, "sample_every": 10},
}

INFEASIBLE_CFG = {
    "name": "bar-sideways",
    "graph": {"n": 2, "edges": [[1, 2]]},
    "shape": {"z_star": [1.0, 0.0], "m": 2},
    "control": {"l": 2},
    "motion": {"translation": [0.0, 1.0]},
    "sim": {"dt": 0.01, "duration": 1.0},
}

ABORT_CFG = {
    "name": "collapsed-pair",
    "graph": {"n": 3, "edges": [[1, 2], [2, 3], [3, 1]]},
    "shape": {"library": "equilateral_triangle", "scale": 1.0},
    "control": {"l": 1},
    "agents": {"initial_positions": [[0.0, 0.0], [0.0, 0.0], [0.5, 0.8]]},
    "sim": {"dt": 0.01, "duration": 1.0},
}


class TestSchema:
    def test_round_trip(self):
        scn = load_scenario(copy.deepcopy(TRIANGLE_CFG))
        again = load_scenario(json.loads(scn.to_json()))
        assert again.raw == scn.raw
        assert again.name == "triangle-translate"
        np.testing.assert_allclose(again.params.mu, scn.params.mu)

    @pytest.mark.parametrize(
        "mutate,match",
        [
            (lambda c: c.pop("sim"), "sim"),
            (lambda c: c["control"].update(l=0), "l"),
            (lambda c: c["control"].update(c=-1.0), "c"),
            (lambda c: c["graph"].update(edges=[[1, 2], [2, 3]]), "library shape"),
            (lambda c: c["motion"].update(mu=[1, 0, 0]), "mu_tilde"),
            (lambda c: c.update(extra=1), "extra"),
        ],
    )
    def test_rejections(self, mutate, match):
        cfg = copy.deepcopy(TRIANGLE_CFG)
        mutate(cfg)
        with pytest.raises(SchemaError, match=match):
            load_scenario(cfg)

    def test_heading_and_enclosing_exclusive(self):
        cfg = copy.deepcopy(TRIANGLE_CFG)
        cfg["heading"] = {"z1_star": [1.0, 0.0]}
        cfg["enclosing"] = {"target": 1, "target_velocity": [0, 0], "kappa": 0.1}
        with pytest.raises(SchemaError, match="mutually exclusive"):
            load_scenario(cfg)

    def test_enclosing_target_row_must_be_zero(self):
        cfg = copy.deepcopy(PRESETS["enclosing"])
        cfg["motion"] = {"mu": [1, 0, 0, 0, 0], "mu_tilde": [0, 0, 0, 0, 0]}
        with pytest.raises(SchemaError, match="target row"):
            load_scenario(cfg)

    def test_unicycle_needs_2d(self):
        cfg = {
            "graph": {"n": 4, "edges": [[1, 2], [2, 3], [3, 1], [1, 4], [2, 4], [3, 4]]},
            "shape": {"library": "regular_tetrahedron"},
            "control": {"l": 2},
            "agents": {"model": "unicycle"},
            "sim": {"dt": 0.01, "duration": 1.0},
        }
        with pytest.raises(SchemaError, match="unicycle"):
            load_scenario(cfg)

    def test_missing_file_and_bad_json(self, tmp_path):
        with pytest.raises(SchemaError):
            load_scenario_file(str(tmp_path / "nope.json"))
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(SchemaError, match="bad.json:1"):
            load_scenario_file(str(bad))

    def test_presets_load(self):
        for name in PRESETS:
            scn = preset(name)
            assert scn.name == name
        with pytest.raises(SchemaError, match="unknown preset"):
            preset("no-such")


class TestBuild:
    def test_seed_overrides_and_determinism(self):
        scn = load_scenario(copy.deepcopy(TRIANGLE_CFG))
        a = build_simulation(scn, seed=5).run()
        b = build_simulation(scn, seed=5).run()
        c = build_simulation(scn, seed=6).run()
        assert a.to_csv() == b.to_csv()
        assert a.to_csv() != c.to_csv()

    def test_heading_preset_build(self):
        sim = build_simulation(preset("heading-square"))
        assert sim.unicycle is not None and sim.unicycle.ell == 11.25
        assert len(sim.events) == 1 and sim.events[0].direction == "ge"
        assert sim.controller.kind == "heading"

    def test_enclosing_preset_build(self):
        sim = build_simulation(preset("enclosing"))
        assert sim.controller.kind == "enclosing"
        assert sim.escape_monitor is not None
        np.testing.assert_allclose(sim.target_velocity, [-3, 0.35])


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


class TestCli:
    def test_analyze_preset(self, capsys):
        assert main(["analyze", "--preset", "enclosing"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["rigidity"]["infinitesimally_rigid"]
        assert report["min_degree"] >= 2

    def test_design_config(self, tmp_path, capsys):
        cfg = _write(tmp_path, TRIANGLE_CFG)
        assert main(["design", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
        out = json.loads(capsys.readouterr().out)
        np.testing.assert_allclose(out["steady_velocity"],
                                   np.tile([0.5, 0.0], (3, 1)), atol=1e-9)
        assert out["closure_residual"] < 1e-9
        assert (tmp_path / "o" / "triangle-translate-design.json").exists()

    def test_simulate_writes_artifacts(self, tmp_path):
        cfg = _write(tmp_path, TRIANGLE_CFG)
        out = tmp_path / "run"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        assert (out / "triangle-translate.csv").exists()
        stats = json.loads((out / "triangle-translate-metrics.json").read_text())
        assert stats["e_norm_final"] < 1e-3
        for suffix in ("trajectories", "error", "speed", "heading"):
            assert (out / f"triangle-translate-{suffix}.svg").exists()

    def test_simulate_repeats_bit_identical(self, tmp_path):
        cfg = _write(tmp_path, TRIANGLE_CFG)
        for d in ("a", "b"):
            assert main(["simulate", "--config", cfg, "--out", str(tmp_path / d)]) == 0
        assert (tmp_path / "a" / "triangle-translate.csv").read_bytes() == (
            tmp_path / "b" / "triangle-translate.csv"
        ).read_bytes()

    def test_simulate_sweep(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FORMCTL_THREADS", "2")
        cfg = _write(tmp_path, TRIANGLE_CFG)
        out = tmp_path / "sweep"
        assert main(["simulate", "--config", cfg, "--out", str(out), "--sweep", "2"]) == 0
        assert (out / "triangle-translate-seed3.csv").exists()
        assert (out / "triangle-translate-seed4.csv").exists()
        sweep = json.loads((out / "triangle-translate-sweep.json").read_text())
        assert len(sweep) == 2

    def test_metrics_command(self, capsys):
        assert main(["metrics", "--preset", "enclosing"]) == 0
        # preset runs 700 s; smoke value only
        stats = json.loads(capsys.readouterr().out)
        assert stats["t_final"] == pytest.approx(700.0)

    def test_exit_schema(self, tmp_path, capsys):
        assert main(["analyze", "--config", str(tmp_path / "missing.json")]) == 2
        assert main(["analyze"]) == 2
        assert "schema error" in capsys.readouterr().err

    def test_exit_design(self, tmp_path, capsys):
        cfg = _write(tmp_path, INFEASIBLE_CFG)
        assert main(["design", "--config", cfg]) == 3
        assert "design infeasible" in capsys.readouterr().err

    def test_exit_abort_with_state_dump(self, tmp_path, capsys):
        cfg = _write(tmp_path, ABORT_CFG)
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "x")]) == 4
        err = capsys.readouterr().err
        assert "simulation aborted" in err and "state dump" in err
