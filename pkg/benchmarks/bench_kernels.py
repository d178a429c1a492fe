"""Timing comparison between the compiled kernels and the NumPy fallback.

Runs the Matern-5/2 cross-covariance and the piecewise log_h evaluation at
the shapes the optimizer actually hits (training-vs-pool covariance blocks,
batched acquisition scoring) and reports median wall time per call for each
backend, the speedup, and the largest numerical disagreement.

Usage: python3 benchmarks/bench_kernels.py [--repeats N] [--seed S]
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from reasonbo._kernels import _numpy as numpy_impl

try:
    from reasonbo._kernels import _native as native_impl
except ImportError:
    native_impl = None


MATERN_SHAPES = (
    (30, 30, 6),     # training block during a fit
    (30, 512, 6),    # training vs candidate pool
    (200, 200, 6),   # large-campaign refit
    (60, 2048, 15),  # wide pool in a high-dimensional space
)
LOG_H_SIZES = (1_000, 100_000, 1_000_000)


def _time_call(fn, args, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def _row(label: str, numpy_s: float, native_s: float | None, diff: float | None) -> str:
    if native_s is None:
        return f"{label:<28} {numpy_s * 1e3:>10.3f}          -        -          -"
    return (f"{label:<28} {numpy_s * 1e3:>10.3f} {native_s * 1e3:>10.3f} "
            f"{numpy_s / native_s:>8.2f}x {diff:>10.2e}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20,
                        help="timed calls per case; the median is reported")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"native extension: {'available' if native_impl else 'NOT BUILT'}")
    print(f"{'case':<28} {'numpy ms':>10} {'native ms':>10} {'speedup':>9} {'max diff':>10}")

    for n1, n2, d in MATERN_SHAPES:
        x1 = rng.uniform(size=(n1, d))
        x2 = rng.uniform(size=(n2, d))
        ls = rng.uniform(0.2, 1.5, size=d)
        call_args = (x1, x2, ls, 1.3)
        base = _time_call(numpy_impl.matern52_cross, call_args, args.repeats)
        if native_impl is None:
            print(_row(f"matern52 {n1}x{n2} d={d}", base, None, None))
            continue
        fast = _time_call(native_impl.matern52_cross, call_args, args.repeats)
        diff = float(np.max(np.abs(
            numpy_impl.matern52_cross(*call_args)
            - native_impl.matern52_cross(*call_args)
        )))
        print(_row(f"matern52 {n1}x{n2} d={d}", base, fast, diff))

    for size in LOG_H_SIZES:
        z = rng.uniform(-40.0, 8.0, size=size)
        base = _time_call(numpy_impl.log_h_array, (z,), args.repeats)
        if native_impl is None:
            print(_row(f"log_h n={size}", base, None, None))
            continue
        fast = _time_call(native_impl.log_h_array, (z,), args.repeats)
        diff = float(np.max(np.abs(
            numpy_impl.log_h_array(z) - native_impl.log_h_array(z)
        )))
        print(_row(f"log_h n={size}", base, fast, diff))

    return 0


if __name__ == "__main__":
    raise SystemExit(main())
