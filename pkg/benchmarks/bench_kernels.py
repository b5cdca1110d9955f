"""Timing comparison of the numba kernels against the pure-numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

The script times each hot kernel under whichever backend this process
imported (controlled by CPPRUNER_NO_NUMBA), so a full comparison is two
invocations:

    python3 benchmarks/bench_kernels.py
    CPPRUNER_NO_NUMBA=1 python3 benchmarks/bench_kernels.py

or pass --both to let the script relaunch itself with the flag set and
print a side-by-side table.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from cppruner import _kernels
from cppruner.rng import RngStream


def _time(fn, repeats=5):
    fn()  # warm-up (numba compilation, cache effects)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_benchmarks():
    results = {}

    state = np.array([1, 2, 3, 4], dtype=np.uint64)
    out = np.empty(200_000, dtype=np.uint64)
    results["xoshiro_fill_200k"] = _time(
        lambda: _kernels.xoshiro256pp_fill(state, out))

    mat = RngStream(0, "bench").normal(64 * 64).reshape(64, 64)
    sym = mat @ mat.T

    def jacobi():
        a = sym.copy()
        _kernels.jacobi_eigvals_sym(a, 1e-12 * np.linalg.norm(sym), 100)

    results["jacobi_eigvals_64"] = _time(jacobi)

    factors = [RngStream(1, f"f{d}").normal(16 * 40).reshape(16, 40)
               for d in range(3)]
    results["cp_reconstruct_16x40^3"] = _time(
        lambda: _kernels.cp_reconstruct(factors))

    a = RngStream(2, "a").uniform(3 * 20_000).reshape(20_000, 3)
    b = RngStream(2, "b").uniform(3 * 5_000).reshape(5_000, 3)
    results["nn_sqdists_20k_vs_5k"] = _time(
        lambda: _kernels.nn_min_sqdists(a, b), repeats=3)

    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--both", action="store_true",
                        help="run the numpy fallback in a subprocess and "
                             "print a side-by-side comparison")
    parser.add_argument("--json", action="store_true",
                        help="emit machine-readable results (used by --both)")
    args = parser.parse_args()

    results = run_benchmarks()
    backend = "numba" if _kernels.USING_NUMBA else "numpy"

    if args.json:
        print(json.dumps({"backend": backend, "results": results}))
        return

    if not args.both or not _kernels.USING_NUMBA:
        print(f"backend: {backend}")
        for name, sec in results.items():
            print(f"  {name:28s} {sec * 1e3:10.3f} ms")
        return

    env = dict(os.environ, CPPRUNER_NO_NUMBA="1")
    proc = subprocess.run([sys.executable, os.path.abspath(__file__), "--json"],
                          env=env, capture_output=True, text=True, check=True)
    fallback = json.loads(proc.stdout)["results"]

    print(f"{'kernel':28s} {'numba':>12s} {'numpy':>12s} {'speedup':>9s}")
    for name, sec in results.items():
        other = fallback[name]
        print(f"{name:28s} {sec * 1e3:10.3f} ms {other * 1e3:10.3f} ms "
              f"{other / sec:8.1f}x")


if __name__ == "__main__":
    main()
