#!/usr/bin/env python3
"""Benchmark the compiled statistic kernels against the NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Times the fused support statistic, the proxy correlations, and the column
norms on shapes representative of sweep and verification workloads, and
reports the speedup of the compiled backend (when built).
"""

import argparse
import time

import numpy as np

from supprec.kernels import _python

try:
    from supprec.kernels import _compiled
except ImportError:
    _compiled = None

SHAPES = [
    ("small trial", (200, 2, 10)),
    ("sweep trial", (1500, 5, 128)),
    ("separation", (4000, 11, 64)),
]


def best_of(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'case':<14} {'kernel':<20} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    for label, (n, m, d) in SHAPES:
        phi = rng.standard_normal((n, m, d))
        y = rng.standard_normal((n, m))
        for name in ("support_statistic", "proxy_correlations", "column_sq_norms"):
            call_args = (phi,) if name == "column_sq_norms" else (phi, y)
            t_py = best_of(getattr(_python, name), call_args, args.repeats)
            if _compiled is None:
                print(f"{label:<14} {name:<20} {t_py * 1e3:>8.2f}ms {'-':>10} {'-':>8}")
                continue
            t_cy = best_of(getattr(_compiled, name), call_args, args.repeats)
            print(
                f"{label:<14} {name:<20} {t_py * 1e3:>8.2f}ms {t_cy * 1e3:>8.2f}ms "
                f"{t_py / t_cy:>7.2f}x"
            )
    if _compiled is None:
        print("\ncompiled backend not built; run `pip install -e .` with Cython available")


if __name__ == "__main__":
    main()
