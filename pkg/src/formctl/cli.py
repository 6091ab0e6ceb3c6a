"""Command-line surface.

    formctl analyze|design|simulate|metrics [--preset NAME | --config FILE]
            [--out DIR] [--seed N]

Exit codes: 0 success, 2 schema error, 3 infeasible design, 4 simulation abort.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
from pathlib import Path

import numpy as np

from .maneuver import validate_assumption_T
from .metrics import angular_rate_about, error_norm, headings, speeds, summary
from .motion import (
    DesignError,
    rotation_space,
    steady_state_velocity,
    translation_space,
)
from .rigidity import Framework, classify_rigidity
from .scenario import PRESETS, SchemaError, Scenario, build_simulation, load_scenario_file, preset
from .sim import SimulationAbort

EXIT_SCHEMA = 2
EXIT_DESIGN = 3
EXIT_ABORT = 4


def _load(args) -> Scenario:
    if args.preset:
        return preset(args.preset)
    if args.config:
        return load_scenario_file(args.config)
    raise SchemaError("one of --preset or --config is required")


def _analysis(scn: Scenario) -> dict:
    g, shape = scn.graph, scn.shape
    report = classify_rigidity(Framework(g, shape.positions(), shape.m))
    U = translation_space(g, shape.z_star, shape.m)
    W = rotation_space(g, shape.z_star, shape.m)
    return {
        "scenario": scn.name,
        "n": g.n,
        "edges": g.n_edges,
        "dimension": shape.m,
        "rigidity": report,
        "dim_translation_space": U.dim,
        "dim_rotation_space": W.dim,
        "min_degree": g.min_degree(),
        "assumption_complete_subgraph": validate_assumption_T(g, shape, scn.params),
    }


def cmd_analyze(args) -> int:
    scn = _load(args)
    report = _analysis(scn)
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / f"{scn.name}-analysis.json").write_text(text + "\n")
    return 0


def cmd_design(args) -> int:
    scn = _load(args)
    g, shape = scn.graph, scn.shape
    params = scn.params
    vel = steady_state_velocity(
        g, params, shape.z_star, shape.m, normalized=scn.motion_term == "normalized"
    ).reshape(g.n, shape.m)
    # residual of the distributed-motion condition at the reference shape
    from .graphs import incidence_matrix, kron_lift
    from .motion import a_matrix

    B = incidence_matrix(g)
    residual = float(np.linalg.norm(kron_lift(B.T, shape.m) @ vel.reshape(-1)))
    out = {
        "scenario": scn.name,
        "mu": params.mu.tolist(),
        "mu_tilde": params.mu_tilde.tolist(),
        "steady_velocity": vel.tolist(),
        "closure_residual": residual,
    }
    text = json.dumps(out, indent=2)
    print(text)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / f"{scn.name}-design.json").write_text(text + "\n")
    return 0


def _plots(log, out_dir: Path, name: str) -> list[str]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    files = []

    def save(fig, suffix):
        path = out_dir / f"{name}-{suffix}.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        files.append(path.name)

    fig, ax = plt.subplots()
    for i in range(log.n):
        ax.plot(log.p[:, i, 0], log.p[:, i, 1], label=f"agent {i + 1}")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("trajectories")
    ax.legend(fontsize="small")
    ax.set_aspect("equal", adjustable="datalim")
    save(fig, "trajectories")

    fig, ax = plt.subplots()
    ax.semilogy(log.t, np.maximum(error_norm(log), 1e-16))
    ax.set_xlabel("t [s]")
    ax.set_ylabel("||e||")
    ax.set_title("distance error")
    save(fig, "error")

    fig, ax = plt.subplots()
    ax.plot(log.t, speeds(log))
    ax.set_xlabel("t [s]")
    ax.set_ylabel("speed")
    ax.set_title("agent speeds")
    save(fig, "speed")

    if log.m == 2:
        fig, ax = plt.subplots()
        ax.plot(log.t, headings(log))
        ax.set_xlabel("t [s]")
        ax.set_ylabel("heading [rad]")
        ax.set_title("velocity headings")
        save(fig, "heading")
    return files


def _run_one(scn: Scenario, seed: int | None):
    sim = build_simulation(scn, seed=seed)
    return sim.run()


def cmd_simulate(args) -> int:
    scn = _load(args)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = [args.seed]
    if args.sweep > 1:
        base = args.seed if args.seed is not None else scn.agents.get("seed", 0)
        seeds = [base + k for k in range(args.sweep)]
    if len(seeds) > 1:
        workers = int(os.environ.get("FORMCTL_THREADS", "0")) or None
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            logs = list(pool.map(_run_one, [scn] * len(seeds), seeds))
    else:
        logs = [_run_one(scn, seeds[0])]
    merged = {}
    for seed, log in zip(seeds, logs):
        tag = scn.name if len(seeds) == 1 else f"{scn.name}-seed{seed}"
        (out_dir / f"{tag}.csv").write_text(log.to_csv())
        stats = summary(log)
        if scn.enclosing:
            rates = [
                float(angular_rate_about(log, i + 1, scn.enclosing["target"])[-1])
                for i in range(log.n)
                if i + 1 != scn.enclosing["target"]
            ]
            stats["angular_rate_about_target"] = rates
        stats["plots"] = _plots(log, out_dir, tag)
        (out_dir / f"{tag}-metrics.json").write_text(json.dumps(stats, indent=2) + "\n")
        merged[tag] = stats
        print(f"{tag}: t_final={stats['t_final']:.1f}s e_final={stats['e_norm_final']:.3g}")
    if len(seeds) > 1:
        (out_dir / f"{scn.name}-sweep.json").write_text(json.dumps(merged, indent=2) + "\n")
    return 0


def cmd_metrics(args) -> int:
    scn = _load(args)
    log = _run_one(scn, args.seed)
    stats = summary(log)
    text = json.dumps(stats, indent=2)
    print(text)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / f"{scn.name}-metrics.json").write_text(text + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="formctl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in [
        ("analyze", cmd_analyze),
        ("design", cmd_design),
        ("simulate", cmd_simulate),
        ("metrics", cmd_metrics),
    ]:
        p = sub.add_parser(name)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--preset", choices=sorted(PRESETS))
        src.add_argument("--config", metavar="FILE")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--seed", type=int, default=None)
        if name == "simulate":
            p.add_argument("--sweep", type=int, default=1, metavar="K",
                           help="run K seeded variants in parallel")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except DesignError as exc:
        print(f"design infeasible: {exc}", file=sys.stderr)
        return EXIT_DESIGN
    except SimulationAbort as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        np.set_printoptions(precision=6, suppress=True)
        print(f"state dump: {exc.state}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
