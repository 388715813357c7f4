"""Benchmark the two evaluation backends against each other.

The hot path of every optimizer and sweep is the batch policy evaluation.
It has two implementations selected at import time by the
``GREENCHAIN_NO_NUMBA`` environment variable: a numba-compiled scalar loop
and a vectorised pure-NumPy twin.  This script runs the same workload in
two subprocesses (one per backend) and reports the per-evaluation times.

    python benchmarks/kernel_benchmark.py [--n 200000] [--repeat 5]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time


def workload(n: int, repeat: int) -> tuple[float, float]:
    """Time one backend.

    Returns microseconds per evaluation for (large batch, population-sized
    batch of 50); the second number is what optimizer generations see.
    """
    import numpy as np

    from greenchain import ModelParameters, make_batch_objective

    params = ModelParameters(v1=0.04, v2=0.06, C_Tax=2.1, C_CT=2.1)
    rng = np.random.default_rng(42)
    X = np.column_stack([
        rng.uniform(1e-3, 2.0, n),
        rng.uniform(0.0, 500.0, n),
        rng.uniform(0.0, 500.0, n),
        rng.uniform(0.01, 50.0, n),
        rng.uniform(80.0, 300.0, n),
    ])
    objective = make_batch_objective(params, "tax")
    objective(X[:100])  # warm up (jit compile on the numba backend)

    best_large = float("inf")
    checksum = 0.0
    for _ in range(repeat):
        start = time.perf_counter()
        values, violations, valid = objective(X)
        best_large = min(best_large, time.perf_counter() - start)
        checksum = float(np.nansum(values))
    print(f"checksum {checksum:.6e}", file=sys.stderr)

    calls = max(n // 50, 1)
    best_small = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        for k in range(calls):
            objective(X[k * 50:(k + 1) * 50])
        best_small = min(best_small, time.perf_counter() - start)
    return best_large / n * 1e6, best_small / (calls * 50) * 1e6


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=200_000,
                        help="batch size per timing run")
    parser.add_argument("--repeat", type=int, default=5,
                        help="repetitions (best time is kept)")
    parser.add_argument("--inner", action="store_true",
                        help="run the workload in the current process")
    args = parser.parse_args()

    if args.inner:
        from greenchain import kernels

        label = "numba" if kernels.NUMBA_ENABLED else "numpy"
        large, small = workload(args.n, args.repeat)
        print(f"{label} {large:.4f} {small:.4f}")
        return 0

    times = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, GREENCHAIN_NO_NUMBA=flag)
        proc = subprocess.run(
            [sys.executable, __file__, "--inner",
             "--n", str(args.n), "--repeat", str(args.repeat)],
            env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            print(proc.stderr, file=sys.stderr)
            return proc.returncode
        name, large, small = proc.stdout.split()
        times[name] = (float(large), float(small))

    print(f"best of {args.repeat} runs, us per evaluation")
    print(f"  {'backend':>7}  {f'batch {args.n}':>14}  {'batch 50':>10}")
    for name, (large, small) in times.items():
        print(f"  {name:>7}  {large:14.4f}  {small:10.4f}")
    if "numba" in times and "numpy" in times:
        print(f"  speedup (numpy/numba): "
              f"{times['numpy'][0] / times['numba'][0]:.2f}x large, "
              f"{times['numpy'][1] / times['numba'][1]:.2f}x population-sized")
    if "numba" not in times:
        print("  (numba backend unavailable in this environment)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
