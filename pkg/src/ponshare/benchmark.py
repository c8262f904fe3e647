"""Benchmark the numba lane against the pure numpy/Python lane.

Runs the same population evaluation in two subprocesses, one per
backend (the backend is fixed at import time, so a fresh interpreter
per lane keeps the comparison honest), and reports wall time per PON
plus the sample mean so agreement between lanes is visible.

    python -m ponshare.benchmark --g 8 --samples 30 --r 0.1
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _worker(args) -> int:
    # imports happen here so the subprocess picks up PONSHARE_BACKEND
    from . import _kernels
    from .allocation import CapacityConfig
    from .experiment import evaluate_population
    from .topology import FixedStages

    cfg = CapacityConfig()
    # warm-up evaluation triggers JIT compilation outside the timed region
    evaluate_population(args.g, args.s, FixedStages(), args.r, args.l, cfg, 2, seed=1)
    t0 = time.perf_counter()
    result = evaluate_population(
        args.g, args.s, FixedStages(), args.r, args.l, cfg, args.samples, seed=args.seed
    )
    dt = time.perf_counter() - t0
    print(
        json.dumps(
            {
                "backend": _kernels.BACKEND,
                "seconds": dt,
                "ms_per_pon": 1000.0 * dt / args.samples,
                "mean": result.stats.mean,
            }
        )
    )
    return 0


def _run_lane(backend: str, argv: list[str]) -> dict:
    env = dict(os.environ, PONSHARE_BACKEND=backend)
    out = subprocess.run(
        [sys.executable, "-m", "ponshare.benchmark", "--worker", *argv],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="compare execution backends")
    parser.add_argument("--g", type=int, default=8)
    parser.add_argument("--s", type=float, default=0.3)
    parser.add_argument("--r", type=float, default=0.1)
    parser.add_argument("--l", type=float, default=2.0)
    parser.add_argument("--samples", type=int, default=30)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    if args.worker:
        return _worker(args)

    argv_pass = [
        "--g", str(args.g), "--s", str(args.s), "--r", str(args.r),
        "--l", str(args.l), "--samples", str(args.samples), "--seed", str(args.seed),
    ]
    print(f"population: g={args.g} s={args.s} r={args.r} l={args.l} samples={args.samples}")
    rows = []
    for backend in ("numpy", "numba"):
        try:
            rows.append(_run_lane(backend, argv_pass))
        except (subprocess.CalledProcessError, ImportError) as exc:
            print(f"{backend}: unavailable ({exc})")
    for row in rows:
        print(
            f"{row['backend']:>6}: {row['seconds']:8.3f} s total, "
            f"{row['ms_per_pon']:8.2f} ms/PON, mean p = {row['mean']:.12g}"
        )
    if len(rows) == 2:
        print(f"speedup: {rows[0]['seconds'] / rows[1]['seconds']:.1f}x")
        if rows[0]["mean"] != rows[1]["mean"]:
            print("WARNING: lanes disagree on the sample mean")
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
