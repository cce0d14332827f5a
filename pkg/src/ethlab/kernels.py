"""Hot numerical kernels.

Each kernel has a pure-numpy implementation and a numba ``@njit`` twin; the
public name binds to whichever backend :mod:`ethlab._accel` selected.  The
twins are kept importable side by side for the equivalence tests and for
``benchmarks/bench_kernels.py``.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

__all__ = [
    "accumulate_pairs",
    "accumulate_pairs_numpy",
    "accumulate_pairs_numba",
    "accumulate_grouped",
    "accumulate_grouped_numpy",
    "accumulate_grouped_numba",
    "window_counts",
    "window_counts_numpy",
    "window_counts_numba",
]


def accumulate_pairs_numpy(block, rows, cols, bins, nbins):
    """Accumulate squared matrix elements into omega bins.

    Gathers ``block[rows[p], cols[p]]`` for every listed pair, squares it, and
    returns per-bin sums of the squares and of their squares (for standard
    errors).  Accumulation order is ascending ``p`` in both backends, so the
    floating-point results are bitwise reproducible.
    """
    v = block[rows, cols]
    v = v * v
    sums = np.bincount(bins, weights=v, minlength=nbins)
    sumsqs = np.bincount(bins, weights=v * v, minlength=nbins)
    return sums, sumsqs


@njit(cache=True)
def _accumulate_pairs_jit(block, rows, cols, bins, nbins):  # pragma: no cover
    sums = np.zeros(nbins)
    sumsqs = np.zeros(nbins)
    for p in range(rows.shape[0]):
        x = block[rows[p], cols[p]]
        v = x * x
        sums[bins[p]] += v
        sumsqs[bins[p]] += v * v
    return sums, sumsqs


def accumulate_pairs_numba(block, rows, cols, bins, nbins):
    """Numba twin of :func:`accumulate_pairs_numpy`."""
    return _accumulate_pairs_jit(
        np.ascontiguousarray(block), rows, cols, bins, nbins
    )


def accumulate_grouped_numpy(values, bins, nbins):
    """Accumulate squared samples sharing a bin index per row.

    ``values`` has one row per eigenstate pair and one column per ensemble
    operator; every entry in row ``p`` lands in ``bins[p]``.  Returns per-bin
    sums of the squares and of the fourth powers.  Accumulation runs row-major
    (pair-major, operator-minor) in both backends, so results are bitwise
    reproducible.
    """
    v = values * values
    flat = v.ravel()
    rep = np.repeat(bins, values.shape[1])
    sums = np.bincount(rep, weights=flat, minlength=nbins)
    sumsqs = np.bincount(rep, weights=flat * flat, minlength=nbins)
    return sums, sumsqs


@njit(cache=True)
def _accumulate_grouped_jit(values, bins, nbins):  # pragma: no cover
    sums = np.zeros(nbins)
    sumsqs = np.zeros(nbins)
    for p in range(values.shape[0]):
        b = bins[p]
        for k in range(values.shape[1]):
            x = values[p, k]
            v = x * x
            sums[b] += v
            sumsqs[b] += v * v
    return sums, sumsqs


def accumulate_grouped_numba(values, bins, nbins):
    """Numba twin of :func:`accumulate_grouped_numpy`."""
    return _accumulate_grouped_jit(np.ascontiguousarray(values), bins, nbins)


def window_counts_numpy(sorted_vals, lows, highs):
    """Count sorted values inside closed windows ``[lows[k], highs[k]]``.

    Windows with ``highs[k] < lows[k]`` count zero.
    """
    lo_idx = np.searchsorted(sorted_vals, lows, side="left")
    hi_idx = np.searchsorted(sorted_vals, highs, side="right")
    return np.maximum(hi_idx - lo_idx, 0)


@njit(cache=True)
def _window_counts_jit(sorted_vals, lows, highs):  # pragma: no cover
    n = lows.shape[0]
    out = np.empty(n, dtype=np.int64)
    for k in range(n):
        lo = np.searchsorted(sorted_vals, lows[k], side="left")
        hi = np.searchsorted(sorted_vals, highs[k], side="right")
        c = hi - lo
        out[k] = c if c > 0 else 0
    return out


def window_counts_numba(sorted_vals, lows, highs):
    """Numba twin of :func:`window_counts_numpy`."""
    return _window_counts_jit(
        np.ascontiguousarray(sorted_vals),
        np.ascontiguousarray(lows, dtype=np.float64),
        np.ascontiguousarray(highs, dtype=np.float64),
    )


if USE_NUMBA:
    accumulate_pairs = accumulate_pairs_numba
    accumulate_grouped = accumulate_grouped_numba
    window_counts = window_counts_numba
else:
    accumulate_pairs = accumulate_pairs_numpy
    accumulate_grouped = accumulate_grouped_numpy
    window_counts = window_counts_numpy
