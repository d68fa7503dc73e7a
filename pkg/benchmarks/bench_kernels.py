#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--repeats N]

The numba path must be enabled (do not set CSMRI_DISABLE_NUMBA) to get the
side-by-side table; otherwise only the numpy timings are printed.
"""

import argparse
import time

import numpy as np

from csmri import kernels
from csmri._jit import NUMBA_ENABLED


def best_of(fn, args, repeats):
    fn(*args)  # warm up (JIT compile on the numba path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    rng = np.random.default_rng(0)
    d = 2 * 64 * 64  # stacked real/imag channels of a 64x64 image
    mix_single = (
        rng.standard_normal((1, d)),
        rng.standard_normal((3, d)),
        rng.random((3, d)) + 0.1,
        np.log(np.full(3, 1.0 / 3.0)),
    )
    mix_batch = (
        rng.standard_normal((256, 64)),
        rng.standard_normal((8, 64)),
        rng.random((8, 64)) + 0.1,
        np.log(np.full(8, 1.0 / 8.0)),
    )
    img = rng.standard_normal((256, 256))
    coeffs = kernels._haar2_analysis_numpy(img, 4)
    return [
        ("mixture_terms (1x8192, K=3)",
         kernels._mixture_terms_jit, kernels._mixture_terms_numpy, mix_single),
        ("mixture_terms (256x64, K=8)",
         kernels._mixture_terms_jit, kernels._mixture_terms_numpy, mix_batch),
        ("haar2_analysis (256x256, L=4)",
         kernels._haar2_analysis_jit, kernels._haar2_analysis_numpy, (img, 4)),
        ("haar2_synthesis (256x256, L=4)",
         kernels._haar2_synthesis_jit, kernels._haar2_synthesis_numpy,
         (coeffs, 4)),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    header = f"{'kernel':<34} {'numba (ms)':>11} {'numpy (ms)':>11} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, jit_fn, numpy_fn, case_args in cases():
        t_numpy = best_of(numpy_fn, case_args, args.repeats) * 1e3
        if NUMBA_ENABLED and jit_fn is not None:
            t_jit = best_of(jit_fn, case_args, args.repeats) * 1e3
            print(f"{name:<34} {t_jit:>11.3f} {t_numpy:>11.3f} "
                  f"{t_numpy / t_jit:>7.1f}x")
        else:
            print(f"{name:<34} {'disabled':>11} {t_numpy:>11.3f} {'-':>8}")


if __name__ == "__main__":
    main()
