"""Benchmark the compiled PM-EB kernel against the pure-Python fallback.

The per-observation confidence-sequence update is the hot loop of every
monitor and every simulated suite run, so the compiled extension's
speedup translates directly into suite runtime. Both backends are
arithmetically identical; this script also verifies that on the
benchmark stream.

Usage: python3 benchmarks/bench_pmeb.py [--length N] [--repeats R]
"""

import argparse
import math
import time

import numpy as np

from shiftwatch.confidence import _reference

try:
    from shiftwatch.confidence import _kernel
except ImportError:
    _kernel = None


def time_backend(backend, xs, log_inv_alpha, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        backend.lower_path(xs, log_inv_alpha)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--length", type=int, default=1_000_000,
                        help="stream length per run (default 1e6)")
    parser.add_argument("--repeats", type=int, default=3,
                        help="timing repeats, best-of (default 3)")
    parser.add_argument("--alpha", type=float, default=0.05)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    xs = rng.random(args.length)
    log_inv_alpha = math.log(1.0 / args.alpha)

    t_py = time_backend(_reference, xs, log_inv_alpha, args.repeats)
    rate_py = args.length / t_py / 1e6
    print(f"python backend: {t_py:.3f}s  ({rate_py:.2f} M updates/s)")

    if _kernel is None:
        print("cython backend: not built (pip install -e . compiles it)")
        return

    t_cy = time_backend(_kernel, xs, log_inv_alpha, args.repeats)
    rate_cy = args.length / t_cy / 1e6
    print(f"cython backend: {t_cy:.3f}s  ({rate_cy:.2f} M updates/s)")
    print(f"speedup: {t_py / t_cy:.1f}x")

    same = np.array_equal(
        _kernel.lower_path(xs, log_inv_alpha),
        _reference.lower_path(xs, log_inv_alpha),
    )
    print(f"backends bit-identical on this stream: {same}")


if __name__ == "__main__":
    main()
