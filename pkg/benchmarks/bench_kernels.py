"""Timing comparison of the compiled and pure-numpy accumulation kernels.

Runs the two hot kernels (pair accumulation into omega bins, batched window
counting) through both backends on realistic desk-scale shapes and prints a
small table.  The numpy twins are the fallback selected by setting
ETHLAB_DISABLE_NUMBA=1; this script imports both directly so one process can
time them side by side.

Usage: python3 benchmarks/bench_kernels.py [--dim N] [--pairs M] [--repeat K]
"""

import argparse
import time

import numpy as np

from ethlab import kernels
from ethlab._accel import HAS_NUMBA


def time_call(fn, *args, repeat=5):
    best = float("inf")
    result = None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def bench_accumulate(dim, n_pairs, repeat, rng):
    block = rng.standard_normal((dim, dim))
    rows = rng.integers(0, dim, n_pairs).astype(np.int32)
    cols = rng.integers(0, dim, n_pairs).astype(np.int32)
    n_bins = 512
    bins = rng.integers(0, n_bins, n_pairs)
    t_np, out_np = time_call(
        kernels.accumulate_pairs_numpy, block, rows, cols, bins, n_bins,
        repeat=repeat,
    )
    rows_table = [("accumulate_pairs", "numpy", t_np)]
    if HAS_NUMBA:
        kernels._accumulate_pairs_jit(block, rows, cols, bins, n_bins)  # warm up
        t_nb, out_nb = time_call(
            kernels._accumulate_pairs_jit, block, rows, cols, bins, n_bins,
            repeat=repeat,
        )
        assert np.array_equal(out_np[0], out_nb[0])
        assert np.array_equal(out_np[1], out_nb[1])
        rows_table.append(("accumulate_pairs", "numba", t_nb))
    return rows_table


def bench_accumulate_grouped(n_pairs, n_ops, repeat, rng):
    values = rng.standard_normal((n_pairs, n_ops))
    n_bins = 512
    bins = np.sort(rng.integers(0, n_bins, n_pairs))
    t_np, out_np = time_call(
        kernels.accumulate_grouped_numpy, values, bins, n_bins, repeat=repeat
    )
    rows_table = [("accumulate_grouped", "numpy", t_np)]
    if HAS_NUMBA:
        kernels._accumulate_grouped_jit(values, bins, n_bins)  # warm up
        t_nb, out_nb = time_call(
            kernels._accumulate_grouped_jit, values, bins, n_bins, repeat=repeat
        )
        assert np.array_equal(out_np[0], out_nb[0])
        assert np.array_equal(out_np[1], out_nb[1])
        rows_table.append(("accumulate_grouped", "numba", t_nb))
    return rows_table


def bench_window_counts(dim, n_windows, repeat, rng):
    values = np.sort(rng.standard_normal(dim * 16))
    centers = rng.uniform(-1, 1, n_windows)
    lows = centers - 0.05
    highs = centers + 0.05
    t_np, out_np = time_call(
        kernels.window_counts_numpy, values, lows, highs, repeat=repeat
    )
    rows_table = [("window_counts", "numpy", t_np)]
    if HAS_NUMBA:
        kernels._window_counts_jit(values, lows, highs)  # warm up
        t_nb, out_nb = time_call(
            kernels._window_counts_jit, values, lows, highs, repeat=repeat
        )
        assert np.array_equal(out_np, out_nb)
        rows_table.append(("window_counts", "numba", t_nb))
    return rows_table


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dim", type=int, default=1024)
    parser.add_argument("--pairs", type=int, default=2_000_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print(f"numba available: {HAS_NUMBA}; active backend: "
          f"{'numba' if kernels.accumulate_pairs is not kernels.accumulate_pairs_numpy else 'numpy'}")
    table = []
    table += bench_accumulate(args.dim, args.pairs, args.repeat, rng)
    table += bench_accumulate_grouped(args.pairs // 4, 16, args.repeat, rng)
    table += bench_window_counts(args.dim, 200_000, args.repeat, rng)
    print(f"{'kernel':<20} {'backend':<8} {'best (ms)':>10}")
    for name, backend, t in table:
        print(f"{name:<20} {backend:<8} {t * 1e3:>10.2f}")
    by_kernel = {}
    for name, backend, t in table:
        by_kernel.setdefault(name, {})[backend] = t
    for name, entry in by_kernel.items():
        if "numba" in entry:
            print(f"{name}: numba speedup x{entry['numpy'] / entry['numba']:.2f}")


if __name__ == "__main__":
    main()
