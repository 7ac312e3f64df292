"""Benchmark the compiled dual-minimization kernel against the pure-Python
fallback.

The per-batch Brent solve is the hot loop of DRO/DORO training, so this
times ``solve_eta`` on batches of increasing size for both lanes and prints
the speedup.  Run as ``python benchmarks/bench_kernel.py``.
"""
import argparse
import time

import numpy as np

from doro import _kernel_py, kernel


def bench(impl, losses, weights, c, beta_star, repeats):
    lo = float(losses.min() - (losses.max() - losses.min() + 1.0))
    hi = float(losses.max())
    start = time.perf_counter()
    for _ in range(repeats):
        impl.solve_eta(losses, weights, c, beta_star, lo, hi, 1e-9, 200)
    return (time.perf_counter() - start) / repeats


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if kernel.IMPLEMENTATION != "cython":
        print("warning: compiled kernel unavailable; comparing python to itself")
    rng = np.random.default_rng(args.seed)
    print(f"active kernel: {kernel.IMPLEMENTATION}")
    print(f"{'n':>8} {'beta*':>6} {'compiled (us)':>14} {'python (us)':>12} "
          f"{'speedup':>8}")
    for n in (16, 64, 256, 1024, 4096):
        losses = rng.uniform(0.0, 10.0, size=n)
        weights = np.full(n, 1.0 / n)
        for beta_star, c in ((1.0, 2.0), (2.0, 1.4142135623730951)):
            compiled = bench(kernel, losses, weights, c, beta_star,
                             args.repeats)
            fallback = bench(_kernel_py, losses, weights, c, beta_star,
                             args.repeats)
            print(f"{n:>8} {beta_star:>6.1f} {1e6 * compiled:>14.1f} "
                  f"{1e6 * fallback:>12.1f} {fallback / compiled:>7.1f}x")


if __name__ == "__main__":
    main()
