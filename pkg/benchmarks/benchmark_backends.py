"""Compare the compiled kernels against the pure-numpy fallback.

Two measurements: the per-call controller kernel, and a full closed-loop
simulation (compiled chunked RK4 vs the Python reference loop).

Run: python benchmarks/benchmark_backends.py
"""

from __future__ import annotations

import time

import numpy as np

import formctl.sim as simmod
from formctl import Controller, MotionParams, Simulation, shape_library
from formctl._kernels import numpy_backend
from formctl.sim import perturbed_start

try:
    from formctl._kernels import _speedups
except ImportError:
    _speedups = None


def bench(fn, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_benchmark():
    shape = shape_library("square_with_diagonal", 225.0, l=1)
    tails, heads = shape.graph.tails_heads()
    rng = np.random.default_rng(0)
    P = rng.normal(scale=200, size=(4, 2))
    mu = rng.normal(size=5)
    calls = 20000

    def loop(impl):
        def run():
            for _ in range(calls):
                impl.controller_fields(P, tails, heads, shape.d, 1, mu, mu, True, -1)

        return run

    t_np = bench(loop(numpy_backend))
    print(f"controller_fields x{calls}: numpy {t_np:.3f}s")
    if _speedups is not None:
        t_cy = bench(loop(_speedups))
        print(f"controller_fields x{calls}: cython {t_cy:.3f}s  ({t_np / t_cy:.1f}x)")


def sim_benchmark():
    shape = shape_library("square_with_diagonal", 225.0, l=2)
    ctrl = Controller(graph=shape.graph, shape=shape,
                      params=MotionParams.zero(5), c=0.5)
    p0 = perturbed_start(shape, 20.0, 1)

    def run():
        Simulation(controller=ctrl, p0=p0, dt=0.01, duration=60.0).run()

    saved = simmod.rk4_chunk
    simmod.rk4_chunk = None
    try:
        t_py = bench(run, repeat=3)
    finally:
        simmod.rk4_chunk = saved
    print(f"60 s gradient-flow run: python loop {t_py:.3f}s")
    if saved is not None:
        t_fast = bench(run, repeat=3)
        print(f"60 s gradient-flow run: compiled  {t_fast:.3f}s  ({t_py / t_fast:.1f}x)")


if __name__ == "__main__":
    kernel_benchmark()
    sim_benchmark()
