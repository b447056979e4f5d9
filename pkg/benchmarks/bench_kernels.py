"""Benchmark the compiled kernels against the pure-Python fallback.

Times the three hot paths (single power-flow solves, the fast D-STATCOM
bisection, and a full controller replay) on the @njit path, then re-runs
the same workload in a subprocess with VOLTSIZER_DISABLE_NUMBA=1 so the
fallback numbers are honest (a .py_func of a composite kernel would still
call jitted inner kernels in-process).

Usage: python benchmarks/bench_kernels.py [--solves N] [--samples N]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from voltsizer import CircuitParams, SyntheticConfig, generate_synthetic_trace
from voltsizer import _kernels
from voltsizer.accel import NUMBA_ENABLED
from voltsizer.circuit import QF_BISECTION_TOL

PARAMS = CircuitParams(r=1.1e-5, x=1.1e-5, f0=1.0, v0=1.0, phi=0.2,
                       epsilon=0.02)


def time_call(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_solver(n):
    rng = np.random.default_rng(0)
    p = rng.uniform(2150.0, 3650.0, size=n)
    c = rng.uniform(0.0, 5000.0, size=n)
    qf = rng.uniform(-1500.0, 1500.0, size=n)

    def run():
        acc = 0.0
        for i in range(n):
            w, l, P, Q, st = _kernels.distflow_core(
                p[i], c[i], qf[i], PARAMS.r, PARAMS.x, PARAMS.f0, PARAMS.v0,
                PARAMS.phi)
            acc += w
        return acc

    return time_call(run)


def bench_fast_control(n):
    rng = np.random.default_rng(1)
    p = rng.uniform(2150.0, 3650.0, size=n)

    def run():
        acc = 0.0
        for i in range(n):
            out = _kernels.fast_qf_core(
                p[i], 3000.0, 800.0, PARAMS.r, PARAMS.x, PARAMS.f0,
                PARAMS.v0, PARAMS.phi, PARAMS.epsilon, QF_BISECTION_TOL)
            acc += out[1]
        return acc

    return time_call(run)


def bench_replay(n_samples):
    trace = generate_synthetic_trace(
        SyntheticConfig(n_samples=n_samples, mean_duration=360.0), seed=9)
    grid = np.linspace(2150.0, 3650.0, 50)
    # representative constraint geometry (values from a sized run)
    g2 = 1.2 * grid - 909.0 + 1.5e7 * 1.1e-5
    g1 = g2 + PARAMS.epsilon / PARAMS.x
    h1 = g1 + 500.0
    h2 = g2 + 120.0
    a1 = PARAMS.f0 * (PARAMS.v0 ** 2 + PARAMS.epsilon)
    a2 = PARAMS.f0 * (PARAMS.v0 ** 2 - PARAMS.epsilon)

    def run():
        return _kernels.replay_core(
            trace.p, 2, 200.0, 50.0, 2800.0, 600.0, 1, 900.0, grid, g1, g2,
            h1, h2, True, PARAMS.r, PARAMS.x, PARAMS.f0, PARAMS.v0,
            PARAMS.phi, PARAMS.epsilon, a1, a2, QF_BISECTION_TOL)

    return time_call(run, repeat=2)


def run_workload(solves, samples):
    return {
        "power-flow solve": (solves, bench_solver(solves)),
        "fast D-STATCOM bisection": (solves, bench_fast_control(solves)),
        "controller replay": (samples, bench_replay(samples)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--solves", type=int, default=20_000)
    ap.add_argument("--samples", type=int, default=50_000)
    ap.add_argument("--emit-json", action="store_true",
                    help=argparse.SUPPRESS)
    args = ap.parse_args()

    results = run_workload(args.solves, args.samples)
    if args.emit_json:
        print(json.dumps({k: v[1] for k, v in results.items()}))
        return

    fallback = None
    if NUMBA_ENABLED:
        env = dict(os.environ, VOLTSIZER_DISABLE_NUMBA="1")
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__),
             "--solves", str(args.solves), "--samples", str(args.samples),
             "--emit-json"],
            env=env, capture_output=True, text=True, check=True)
        fallback = json.loads(out.stdout.strip().splitlines()[-1])

    print(f"numba enabled: {NUMBA_ENABLED}")
    print(f"{'case':<28}{'n':>9}{'python':>12}{'numba':>12}{'speedup':>10}")
    for name, (n, t) in results.items():
        if fallback is not None:
            t_py = fallback[name]
            print(f"{name:<28}{n:>9}{t_py:10.3f}s{t:10.3f}s"
                  f"{t_py / t:9.1f}x")
        else:
            print(f"{name:<28}{n:>9}{t:10.3f}s{'-':>11}{'-':>10}")


if __name__ == "__main__":
    main()
