"""Compiled vs numpy characteristic-function accumulation.

    python benchmarks/bench_kernels.py [--E 20000] [--M 16 32 64]
"""

import argparse
import time

import numpy as np

from clickgbs import _kernels_py

try:
    from clickgbs import _ckernels
except ImportError:
    _ckernels = None


def inputs(E, M, seed=0):
    rng = np.random.default_rng(seed)
    mu = 0.2 * (rng.standard_normal((E, M)) + 1j * rng.standard_normal((E, M)))
    p0 = np.exp(-mu)
    p1 = mu * p0
    p2 = 0.5 * mu * mu * p0
    theta = 2 * np.pi / (M + 1)
    k1, k2 = np.meshgrid(np.arange(M + 1), np.arange(M + 1), indexing="ij")
    x = np.exp(-1j * theta * k1.ravel())
    y = np.exp(-1j * theta * k2.ravel())
    return p0, p1, p2, x, y


def timed(fn, *args, repeat=3):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--E", type=int, default=20000)
    ap.add_argument("--M", type=int, nargs="+", default=[16, 32, 64])
    args = ap.parse_args()
    print(f"{'M':>4} {'grid':>6} {'numpy [s]':>10} {'cython [s]':>11} {'speedup':>8} {'max |diff|':>11}")
    for M in args.M:
        p0, p1, p2, x, y = inputs(args.E, M)
        t_py, (s_py, _) = timed(_kernels_py.char_accumulate, p0, p1, p2, x, y, 0, args.E)
        if _ckernels is None:
            print(f"{M:>4} {len(x):>6} {t_py:>10.3f} {'n/a':>11}")
            continue
        t_c, (s_c, _) = timed(_ckernels.char_accumulate, p0, p1, p2, x, y, 0, args.E)
        diff = np.max(np.abs(s_py - s_c))
        print(f"{M:>4} {len(x):>6} {t_py:>10.3f} {t_c:>11.3f} {t_py / t_c:>8.1f} {diff:>11.2e}")


if __name__ == "__main__":
    main()
