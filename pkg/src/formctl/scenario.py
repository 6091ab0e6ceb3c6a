"""Declarative scenario configs: JSON schema, validation, construction of
simulations, and the experiment-replication presets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import jsonschema

from .graphs import FormationGraph, GraphError
from .maneuver import ConfigurationError, EscapeMonitor, HeadingTarget
from .motion import DesignError, MotionParams, design_rotation, design_translation
from .rigidity import DesiredShape, ShapeError, shape_library
from .sim import Controller, Event, Simulation, UnicycleModel, perturbed_start

SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["graph", "shape", "control", "sim"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "graph": {
            "type": "object",
            "required": ["n", "edges"],
            "properties": {
                "n": {"type": "integer", "minimum": 2},
                "edges": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "items": {"type": "integer", "minimum": 1},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
            },
        },
        "shape": {
            "type": "object",
            "properties": {
                "library": {"type": "string"},
                "scale": {"type": "number"},
                "d3": {"type": "number"},
                "z_star": {"type": "array", "items": {"type": "number"}},
                "m": {"type": "integer", "enum": [2, 3]},
            },
        },
        "control": {
            "type": "object",
            "properties": {
                "l": {"type": "integer", "minimum": 1},
                "c": {"type": "number", "exclusiveMinimum": 0},
                "motion_term": {"type": "string", "enum": ["raw", "normalized"]},
            },
        },
        "motion": {
            "type": "object",
            "properties": {
                "translation": {"type": "array", "items": {"type": "number"}},
                "rotation": {
                    "type": "object",
                    "properties": {
                        "omega": {"type": "number"},
                        "center": {},
                    },
                },
                "mu": {"type": "array", "items": {"type": "number"}},
                "mu_tilde": {"type": "array", "items": {"type": "number"}},
            },
        },
        "agents": {
            "type": "object",
            "properties": {
                "model": {"type": "string", "enum": ["single_integrator", "unicycle"]},
                "initial_positions": {"type": "array"},
                "seed": {"type": "integer"},
                "radius": {"type": "number"},
                "offset": {"type": "array", "items": {"type": "number"}},
                "frames": {"type": "string", "enum": ["identity", "random"]},
                "handle": {"type": "number"},
                "saturation": {
                    "type": "object",
                    "properties": {"v": {"type": "number"}, "omega": {"type": "number"}},
                },
            },
        },
        "heading": {
            "type": "object",
            "required": ["z1_star"],
            "properties": {
                "z1_star": {"type": "array", "items": {"type": "number"}},
                "events": {"type": "array"},
            },
        },
        "enclosing": {
            "type": "object",
            "required": ["target", "target_velocity", "kappa"],
            "properties": {
                "target": {"type": "integer", "minimum": 1},
                "target_velocity": {"type": "array", "items": {"type": "number"}},
                "kappa": {"type": "number", "exclusiveMinimum": 0},
                "escape_reset": {"type": "boolean"},
            },
        },
        "sim": {
            "type": "object",
            "required": ["dt", "duration"],
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "duration": {"type": "number", "exclusiveMinimum": 0},
                "sample_every": {"type": "integer", "minimum": 1},
            },
        },
    },
}


class SchemaError(ValueError):
    """Scenario file rejected by schema or cross-field validation."""


@dataclass
class Scenario:
    """Validated scenario; keeps the raw config for round-tripping."""

    raw: dict
    graph: FormationGraph
    shape: DesiredShape
    c: float
    motion_term: str
    params: MotionParams
    model: str
    heading: dict | None
    enclosing: dict | None
    sim: dict
    agents: dict

    @property
    def name(self) -> str:
        return self.raw.get("name", "scenario")

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2)


def _build_shape(cfg: dict, graph: FormationGraph, l: int) -> DesiredShape:
    sc = cfg["shape"]
    if "library" in sc:
        shape = shape_library(sc["library"], sc.get("scale", 1.0), d3=sc.get("d3"), l=l)
        if shape.graph.edges != graph.edges or shape.graph.n != graph.n:
            raise SchemaError(
                f"graph does not match library shape {sc['library']!r}: "
                f"expected edges {list(shape.graph.edges)}"
            )
        return shape
    if "z_star" in sc:
        return DesiredShape(graph, np.asarray(sc["z_star"], float), m=sc.get("m", 2), l=l)
    raise SchemaError("shape needs either 'library' or 'z_star'")


def _build_params(cfg: dict, graph: FormationGraph, shape: DesiredShape) -> MotionParams:
    mo = cfg.get("motion")
    if not mo:
        return MotionParams.zero(graph.n_edges)
    params = MotionParams.zero(graph.n_edges)
    if "mu" in mo or "mu_tilde" in mo:
        if "mu" not in mo or "mu_tilde" not in mo:
            raise SchemaError("explicit motion needs both 'mu' and 'mu_tilde'")
        if len(mo["mu"]) != graph.n_edges or len(mo["mu_tilde"]) != graph.n_edges:
            raise SchemaError(f"motion parameter vectors must have {graph.n_edges} entries")
        return MotionParams(mo["mu"], mo["mu_tilde"])
    if "translation" in mo:
        params = params + design_translation(
            graph, shape.z_star, mo["translation"], shape.m
        )
    if "rotation" in mo:
        rot = mo["rotation"]
        params = params + design_rotation(
            graph, shape.z_star, rot["omega"], rot.get("center", "centroid"),
            shape.m, shape=shape,
        )
    return params


def load_scenario(cfg: dict) -> Scenario:
    """Validate a raw config dict and resolve it into simulation objects."""
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"at {path}: {exc.message}") from exc
    try:
        graph = FormationGraph(cfg["graph"]["n"], cfg["graph"]["edges"])
        ctrl = cfg.get("control", {})
        l = ctrl.get("l", 2)
        shape = _build_shape(cfg, graph, l)
        params = _build_params(cfg, graph, shape)
    except (GraphError, ShapeError, ConfigurationError) as exc:
        raise SchemaError(str(exc)) from exc

    heading = cfg.get("heading")
    enclosing = cfg.get("enclosing")
    if heading and enclosing:
        raise SchemaError("heading and enclosing sections are mutually exclusive")
    if enclosing:
        tgt = enclosing["target"]
        if tgt > graph.n:
            raise SchemaError(f"enclosing target {tgt} outside graph")
        if len(enclosing["target_velocity"]) != shape.m:
            raise SchemaError("target_velocity dimension mismatch")
        from .motion import a_matrix

        if np.any(a_matrix(graph, params)[tgt - 1, :] != 0.0):
            raise SchemaError("motion parameters must leave the target row of A zero")
    if heading and graph.edges[0] != (1, 2):
        raise SchemaError("heading control requires edge 1 to be (1, 2)")

    agents = cfg.get("agents", {})
    model = agents.get("model", "single_integrator")
    if model == "unicycle" and (shape.m != 2 or enclosing):
        raise SchemaError("unicycle model only supports 2D non-enclosing scenarios")
    return Scenario(
        raw=cfg, graph=graph, shape=shape, c=ctrl.get("c", 1.0),
        motion_term=ctrl.get("motion_term", "raw"), params=params, model=model,
        heading=heading, enclosing=enclosing, sim=cfg["sim"], agents=agents,
    )


def load_scenario_file(path: str) -> Scenario:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return load_scenario(cfg)


def _parse_events(heading: dict) -> list[Event]:
    events = []
    for ev in heading.get("events", []):
        cond = ev["when_x_of_agent"]
        direction = "ge" if "ge" in cond else "le"
        events.append(
            Event(
                agent=cond["agent"], axis=0, threshold=cond[direction],
                direction=direction, new_z1_star=np.asarray(ev["set_z1_star"], float),
            )
        )
    return events


def build_simulation(scn: Scenario, seed: int | None = None) -> Simulation:
    """Instantiate the deterministic run described by a scenario."""
    from .sim import random_frames

    n, m = scn.graph.n, scn.shape.m
    agents = scn.agents
    if "initial_positions" in agents:
        p0 = np.asarray(agents["initial_positions"], float).reshape(n, m)
    else:
        p0 = perturbed_start(
            scn.shape, agents.get("radius", 0.0),
            seed if seed is not None else agents.get("seed", 0),
            agents.get("offset"),
        )
    kind = "formation"
    heading_target = None
    events: list[Event] = []
    if scn.heading:
        kind = "heading"
        heading_target = HeadingTarget(np.asarray(scn.heading["z1_star"], float))
        events = _parse_events(scn.heading)
    kappa, target_velocity, v_hat0, monitor = 0.0, None, None, None
    target = 1
    if scn.enclosing:
        kind = "enclosing"
        target = scn.enclosing["target"]
        kappa = scn.enclosing["kappa"]
        target_velocity = np.asarray(scn.enclosing["target_velocity"], float)
        if scn.enclosing.get("escape_reset", True):
            monitor = EscapeMonitor()
    frames = None
    if agents.get("frames") == "random":
        frames = random_frames(n, m, (seed if seed is not None else agents.get("seed", 0)) + 1)
    controller = Controller(
        graph=scn.graph, shape=scn.shape, params=scn.params, c=scn.c, kind=kind,
        normalized=scn.motion_term == "normalized", heading=heading_target,
        target=target, kappa=kappa, frames=frames,
    )
    unicycle = None
    theta0 = None
    if scn.model == "unicycle":
        sat = agents.get("saturation", {})
        unicycle = UnicycleModel(
            ell=agents.get("handle", 0.05 * float(np.mean(scn.shape.d))),
            sat_v=sat.get("v"), sat_omega=sat.get("omega"),
        )
        rng = np.random.default_rng((seed if seed is not None else agents.get("seed", 0)) + 2)
        theta0 = rng.uniform(-np.pi, np.pi, n)
    return Simulation(
        controller=controller, p0=p0, dt=scn.sim["dt"], duration=scn.sim["duration"],
        sample_every=scn.sim.get("sample_every", 10), events=events,
        unicycle=unicycle, theta0=theta0, target_velocity=target_velocity,
        v_hat0=v_hat0, escape_monitor=monitor,
    )


# Experiment-replication presets. The heading preset's motion parameters are
# sign-flipped relative to the published pair so that the initial drift
# matches the stated desired heading of 0 rad; speeds are unchanged.
PRESETS: dict[str, dict] = {
    "heading-square": {
        "name": "heading-square",
        "graph": {"n": 4, "edges": [[1, 2], [2, 3], [3, 1], [1, 4], [3, 4]]},
        "shape": {"library": "square_with_diagonal", "scale": 225},
        "control": {"l": 1, "c": 0.035, "motion_term": "normalized"},
        "motion": {"mu": [5, 0, 0, 0, -5], "mu_tilde": [5, 0, 0, 0, -5]},
        "agents": {
            "model": "unicycle", "seed": 7, "radius": 30.0,
            "offset": [-800.0, 0.0], "handle": 11.25,
            "saturation": {"v": 40.0, "omega": 2.0},
        },
        "heading": {
            "z1_star": [225, 0],
            "events": [
                {"when_x_of_agent": {"agent": 1, "ge": 1100}, "set_z1_star": [-225, 0]}
            ],
        },
        "sim": {"dt": 0.01, "duration": 1100.0, "sample_every": 25},
    },
    "enclosing": {
        "name": "enclosing",
        "graph": {"n": 4, "edges": [[1, 2], [2, 3], [3, 1], [4, 2], [4, 3]]},
        "shape": {"library": "enclosing_quad", "scale": 130},
        "control": {"l": 1, "c": 0.1, "motion_term": "normalized"},
        "motion": {
            "mu": [0, 0, 0, -13.97242861649687, 9.88],
            "mu_tilde": [0, 4.94, 0, -6.986214308248435, 0],
        },
        "agents": {"model": "single_integrator", "seed": 11, "radius": 40.0,
                   "offset": [900.0, 300.0]},
        "enclosing": {"target": 1, "target_velocity": [-3, 0.35], "kappa": 0.01},
        "sim": {"dt": 0.01, "duration": 700.0, "sample_every": 25},
    },
}


def preset(name: str) -> Scenario:
    if name not in PRESETS:
        raise SchemaError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    return load_scenario(json.loads(json.dumps(PRESETS[name])))
