"""Timing comparison of the jitted kernels against the pure-NumPy fallback.

The hot path of every Monte Carlo study is simulate → cross-covariances →
generalized eigenproblem → (optionally) a 299-draw bootstrap. This script
times those stages in the current process and, unless asked not to, re-runs
itself once with ``COINTRR_DISABLE_NUMBA=1`` so both execution modes appear in
one report.

Usage::

    python3 benchmarks/bench_kernels.py [--t-steps 100] [--p 3] [--reps 200]
                                        [--bootstrap-b 299] [--no-respawn]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from cointrr._kernels import (
    NUMBA_ENABLED,
    bootstrap_statistics,
    fit_eigenproblem,
    sim_levels,
)
from cointrr.experiments import gamma_c_params
from cointrr.simulate import RngStream


def time_stage(label: str, reps: int, fn) -> float:
    fn()  # warm-up: first call pays any compilation cost
    start = time.perf_counter()
    for _ in range(reps):
        fn()
    per_call = (time.perf_counter() - start) / reps
    print(f"  {label:<28s} {per_call * 1e6:10.1f} us/call")
    return per_call


def run_benchmark(t_steps: int, p: int, reps: int, b: int) -> None:
    mode = "numba" if NUMBA_ENABLED else "numpy fallback"
    print(f"mode: {mode}  (t_steps={t_steps}, p={p}, reps={reps}, b={b})")
    params = gamma_c_params(p, 10.0, t_steps)
    growth = np.eye(p) + params.pi
    gen = RngStream(0).generator()
    shocks = gen.standard_normal((t_steps + 1, p))

    time_stage("simulate path", reps, lambda: sim_levels(growth, shocks))
    levels = sim_levels(growth, shocks)
    time_stage("eigenproblem fit", reps, lambda: fit_eigenproblem(levels, t_steps, 1e-12))
    vals, vecs, s_dxx, ok = fit_eigenproblem(levels, t_steps, 1e-12)
    assert ok
    vals = np.clip(vals, 0.0, 1.0 - 1e-12)
    indices = gen.integers(0, t_steps, size=(p, b, t_steps), dtype=np.int64)
    boot_reps = max(1, reps // 20)
    time_stage(
        f"bootstrap ({b} draws x {p})",
        boot_reps,
        lambda: bootstrap_statistics(levels, t_steps, vals, vecs, s_dxx, indices, True, 1e-12),
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--t-steps", type=int, default=100)
    parser.add_argument("--p", type=int, default=3)
    parser.add_argument("--reps", type=int, default=200)
    parser.add_argument("--bootstrap-b", type=int, default=299)
    parser.add_argument(
        "--no-respawn",
        action="store_true",
        help="time only the current mode; do not re-run with the fallback",
    )
    args = parser.parse_args(argv)
    run_benchmark(args.t_steps, args.p, args.reps, args.bootstrap_b)

    if not args.no_respawn and NUMBA_ENABLED:
        print()
        sys.stdout.flush()  # keep parent/child output ordered when piped
        env = dict(os.environ, COINTRR_DISABLE_NUMBA="1")
        cmd = [sys.executable, os.path.abspath(__file__), "--no-respawn",
               "--t-steps", str(args.t_steps), "--p", str(args.p),
               "--reps", str(max(1, args.reps // 10)),
               "--bootstrap-b", str(args.bootstrap_b)]
        return subprocess.call(cmd, env=env)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
