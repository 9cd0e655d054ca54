"""Benchmark the compiled kernels against the NumPy reference.

Usage: python benchmarks/bench_kernels.py [--sizes small|large]

Covers the three hot paths: row popcounts, blockwise Tanimoto similarity,
and the batched tree-split scan. Both backends produce identical results;
this script only reports speed.
"""

import argparse
import time

import numpy as np

from fingertrain import kernels
from fingertrain.kernels import _ref

try:
    from fingertrain.kernels import _fast
except ImportError:
    _fast = None


def timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def random_packed(rng, n, words, density=0.15):
    raw = rng.random((n, words, 64)) < density
    out = np.zeros((n, words), dtype=np.uint64)
    for w in range(64):
        out |= raw[:, :, w].astype(np.uint64) << np.uint64(w)
    return out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", choices=("small", "large"), default="small")
    args = parser.parse_args()

    if args.sizes == "large":
        n_fp, words = 4000, 32
        n_rows, n_cols = 4000, 256
    else:
        n_fp, words = 1000, 32
        n_rows, n_cols = 1000, 128

    rng = np.random.default_rng(0)
    packed = random_packed(rng, n_fp, words)

    values = np.sort(rng.normal(size=(n_rows, n_cols)), axis=0)
    grad = rng.normal(size=(n_rows, n_cols))
    hess = np.abs(rng.normal(size=(n_rows, n_cols))) + 0.1

    print(f"active backend: {kernels.BACKEND}")
    rows = []

    rows.append(("popcount_rows", f"({n_fp}x{words} words)",
                 timeit(lambda: _ref.popcount_rows(packed)),
                 timeit(lambda: _fast.popcount_rows(packed)) if _fast else None))
    rows.append(("tanimoto_block", f"({n_fp}x{n_fp} pairs)",
                 timeit(lambda: _ref.tanimoto_block(packed, packed), repeats=3),
                 timeit(lambda: _fast.tanimoto_block(packed, packed), repeats=3) if _fast else None))
    rows.append(("scan_split_columns", f"({n_rows} rows x {n_cols} cols)",
                 timeit(lambda: _ref.scan_split_columns(values, grad, hess, 5, 1.0)),
                 timeit(lambda: _fast.scan_split_columns(values, grad, hess, 5, 1.0)) if _fast else None))

    print(f"{'kernel':<20} {'size':<22} {'numpy':>10} {'compiled':>10} {'speedup':>9}")
    for name, size, ref_t, fast_t in rows:
        if fast_t is None:
            print(f"{name:<20} {size:<22} {ref_t * 1e3:>8.2f}ms {'n/a':>10} {'n/a':>9}")
        else:
            print(f"{name:<20} {size:<22} {ref_t * 1e3:>8.2f}ms {fast_t * 1e3:>8.2f}ms {ref_t / fast_t:>8.1f}x")


if __name__ == "__main__":
    main()
