"""Measurement protocols.

Random local-operator ensembles, their matrix elements between interacting
eigenstates, binned off-diagonal statistics over mean-energy windows, and
band detection against subsystem spectral gaps.

The ensemble loop is the hot path at desk scale: for every operator the
matrix-element evaluation is restricted to the column blocks that intersect
the requested mean-energy band, so the cost per operator scales with the band
area rather than the full matrix.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.signal import find_peaks

from .errors import (
    DimensionError,
    EmptyWindowError,
    InsufficientDataError,
    ValidationError,
)
from .hamiltonians import BipartiteSystem, haar_orthogonal
from .kernels import accumulate_grouped, accumulate_pairs
from .linalg import Spectrum

__all__ = [
    "OperatorEnsembleSpec",
    "BinningParams",
    "BinnedStatistics",
    "PairBand",
    "EnsembleResult",
    "BandReport",
    "REFERENCE_SPECTRAL_RANGE",
    "sample_local_operator",
    "matrix_elements_total_basis",
    "bin_offdiagonal",
    "run_ensemble",
    "detect_bands",
    "subsystem_gap_omegas",
    "default_bin_width",
]

# Spectral range of the 12-site reference chain at the default couplings; the
# default omega bin width scales with the ratio of a system's range to this.
REFERENCE_SPECTRAL_RANGE = 35.6541


@dataclass(frozen=True)
class OperatorEnsembleSpec:
    """Random operator ensemble on the A factor.

    Operators draw ``dim_a`` eigenvalues uniformly on [-1, 1], normalize to
    zero mean and unit mean square, and conjugate the diagonal by a Haar
    orthogonal.  Streams derive deterministically from ``(seed, index)``.
    """

    dim_a: int
    count: int = 250
    seed: int = 0
    spectrum_law: str = "flat_pm1"
    normalize: bool = True

    def __post_init__(self):
        if self.count < 1:
            raise ValidationError("count must be >= 1")
        if self.dim_a < 1:
            raise ValidationError("dim_a must be >= 1")
        if self.spectrum_law != "flat_pm1":
            raise ValidationError(f"unknown spectrum_law {self.spectrum_law!r}")
        if self.dim_a == 1 and self.normalize:
            raise ValidationError(
                "dim_a=1 with normalization is degenerate: the single "
                "eigenvalue becomes 0 after mean subtraction and cannot have "
                "mean square 1"
            )


def sample_local_operator(spec: OperatorEnsembleSpec, index: int) -> np.ndarray:
    """Draw operator ``index`` of the ensemble (a dense symmetric matrix)."""
    if not 0 <= index < spec.count:
        raise ValidationError(f"index {index} outside 0..{spec.count - 1}")
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, index)))
    vals = rng.uniform(-1.0, 1.0, spec.dim_a)
    if spec.normalize:
        vals = vals - vals.mean()
        ms = float((vals**2).mean())
        if ms == 0.0:
            raise ValidationError("degenerate draw: zero spectrum after centering")
        vals = vals / np.sqrt(ms)
    basis = haar_orthogonal(spec.dim_a, rng)
    op = (basis * vals) @ basis.T
    return 0.5 * (op + op.T)


def _apply_a_factor(op_a: np.ndarray, vecs: np.ndarray, dim_a: int, dim_b: int):
    # (op_a (x) identity_B) @ vecs without materializing the Kronecker product.
    total = vecs.shape[1]
    v3 = vecs.reshape(dim_a, dim_b * total)
    return (op_a @ v3).reshape(dim_a * dim_b, total)


def matrix_elements_total_basis(
    system: BipartiteSystem, op_a: np.ndarray
) -> np.ndarray:
    """All matrix elements of ``op_a (x) identity`` between total eigenstates."""
    if op_a.shape != (system.dim_a, system.dim_a):
        raise DimensionError(
            f"operator shape {op_a.shape} does not match dim_a={system.dim_a}"
        )
    vecs = system.spectrum_t.eigenvectors
    w = _apply_a_factor(op_a, vecs, system.dim_a, system.dim_b)
    return vecs.T @ w


@dataclass(frozen=True)
class BinningParams:
    """Mean-energy window half-width and omega bin width.

    ``omega_bin_width=None`` selects the reference default 0.015 rescaled by
    the system's spectral range relative to the 12-site reference chain.
    """

    ebar_halfwidth: float = 0.5
    omega_bin_width: Optional[float] = None

    def __post_init__(self):
        if self.ebar_halfwidth <= 0:
            raise ValidationError("ebar_halfwidth must be positive")
        if self.omega_bin_width is not None and self.omega_bin_width <= 0:
            raise ValidationError("omega_bin_width must be positive")

    def resolve_width(self, spectral_range: float) -> float:
        if self.omega_bin_width is not None:
            return self.omega_bin_width
        return default_bin_width(spectral_range)


def default_bin_width(spectral_range: float) -> float:
    """Reference bin width 0.015 scaled to the system's spectral range."""
    return 0.015 * spectral_range / REFERENCE_SPECTRAL_RANGE


@dataclass(frozen=True, eq=False)
class BinnedStatistics:
    """Binned mean squared off-diagonal elements in one mean-energy window.

    Only bins with at least one pair are reported; ``omega_mid`` is the bin
    center, ``std_err`` the standard error of the per-sample mean (zero for
    single-sample bins).
    """

    ebar_center: float
    ebar_halfwidth: float
    omega_bin_width: float
    omega_mid: np.ndarray
    mean_sq: np.ndarray
    count: np.ndarray
    std_err: np.ndarray

    @property
    def n_samples(self) -> int:
        return int(self.count.sum())


class PairBand:
    """Precomputed unordered-pair structure for one mean-energy window.

    For sorted eigenvalues the partners of a given ``alpha`` form a contiguous
    index range, so the band is stored as flat (row, col, bin) arrays ordered
    alpha-major.  Two evaluation engines share the structure:

    - the grouped engine precomputes, per pair, the operator-independent
      transfer matrix ``T[p, q] = sum_j V3[alpha, p, j] V3[beta, q, j]`` so
      matrix elements of every ensemble operator follow from one small matrix
      product (worthwhile when ``dim_a <= dim_b``);
    - the direct engine evaluates elements per operator with blocked matrix
      products over the band (used when the A factor is the larger one).

    Pair order, batch boundaries, and accumulation order are fixed, so the
    results are bit-reproducible for any thread count.
    """

    def __init__(self, energies, ebar_center, ebar_halfwidth, bin_width):
        energies = np.asarray(energies, dtype=float)
        n = energies.size
        lo_sum = 2.0 * (ebar_center - ebar_halfwidth)
        hi_sum = 2.0 * (ebar_center + ebar_halfwidth)
        lo = np.searchsorted(energies, lo_sum - energies, side="left")
        hi = np.searchsorted(energies, hi_sum - energies, side="right")
        ar = np.arange(n)
        lo = np.maximum(lo, ar + 1)  # unordered pairs once: beta > alpha
        hi = np.maximum(hi, lo)
        lens = hi - lo
        total_pairs = int(lens.sum())
        if total_pairs == 0:
            raise EmptyWindowError(
                f"no eigenstate pairs with mean energy in "
                f"[{ebar_center - ebar_halfwidth}, {ebar_center + ebar_halfwidth}]"
            )
        self.energies = energies
        self.ebar_center = float(ebar_center)
        self.ebar_halfwidth = float(ebar_halfwidth)
        self.bin_width = float(bin_width)
        self.n_pairs = total_pairs

        rows = np.repeat(ar, lens)
        base = np.repeat(lo, lens)
        within = np.arange(total_pairs) - np.repeat(np.cumsum(lens) - lens, lens)
        cols = base + within
        inv = 1.0 / (2.0 * bin_width)
        bins = ((energies[cols] - energies[rows]) * inv).astype(np.int64)
        self.rows = rows.astype(np.int32)
        self.cols = cols.astype(np.int32)
        self.bins = bins
        self.n_bins = int(bins.max()) + 1
        self.pair_counts = np.bincount(bins, minlength=self.n_bins)
        # Pair-slice boundaries per alpha, for batch scheduling.
        self._alpha_start = np.concatenate(([0], np.cumsum(lens)))
        self._alpha_lo = lo
        self._alpha_hi = hi
        self._direct_blocks = None

    # -- grouped engine ----------------------------------------------------

    def _alpha_batches(self, dim_a: int):
        """Contiguous alpha batches sized so the transfer panels stay small."""
        batch = max(4, 512 // dim_a)
        n = self.energies.size
        out = []
        for a0 in range(0, n, batch):
            a1 = min(a0 + batch, n)
            s0 = int(self._alpha_start[a0])
            s1 = int(self._alpha_start[a1])
            if s1 > s0:
                out.append((a0, a1, s0, s1))
        return out

    def accumulate_grouped_batch(self, v3, ops_flat, batch, chunk: int = 8192):
        """Accumulate one alpha batch of pairs for all operators at once.

        ``v3`` is the eigenvector stack shaped ``(total, dim_a, dim_b)``;
        ``ops_flat`` holds one flattened operator per column.
        """
        a0, a1, s0, s1 = batch
        dim_a = v3.shape[1]
        cols = self.cols[s0:s1]
        blo = int(cols.min())
        bhi = int(cols.max()) + 1
        a_panel = v3[a0:a1].reshape((a1 - a0) * dim_a, v3.shape[2])
        b_panel = np.ascontiguousarray(v3[blo:bhi].transpose(2, 0, 1)).reshape(
            v3.shape[2], (bhi - blo) * dim_a
        )
        rect = (a_panel @ b_panel).reshape(a1 - a0, dim_a, bhi - blo, dim_a)
        transfer = rect[self.rows[s0:s1] - a0, :, cols - blo, :].reshape(
            s1 - s0, dim_a * dim_a
        )
        sums = np.zeros(self.n_bins)
        sumsqs = np.zeros(self.n_bins)
        for c0 in range(0, s1 - s0, chunk):
            c1 = min(c0 + chunk, s1 - s0)
            values = transfer[c0:c1] @ ops_flat
            s, q = accumulate_grouped(
                values, self.bins[s0 + c0 : s0 + c1], self.n_bins
            )
            sums += s
            sumsqs += q
        return sums, sumsqs

    def accumulate_grouped_all(self, v3, ops_flat, *, threads: int = 1):
        """Grouped-engine accumulation over the whole band.

        Per-batch partial sums merge in batch order, so the result is
        identical for any ``threads``.
        """
        batches = self._alpha_batches(v3.shape[1])
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                partials = list(
                    pool.map(
                        lambda b: self.accumulate_grouped_batch(v3, ops_flat, b),
                        batches,
                    )
                )
        else:
            partials = [
                self.accumulate_grouped_batch(v3, ops_flat, b) for b in batches
            ]
        sums = np.zeros(self.n_bins)
        sumsqs = np.zeros(self.n_bins)
        for s, q in partials:
            sums += s
            sumsqs += q
        return sums, sumsqs

    # -- direct engine -----------------------------------------------------

    def _build_direct_blocks(self, max_cols: int = 256):
        """Column blocks capped in both size and energy span.

        The energy cap keeps the intersecting row range tight where the
        spectrum is sparse, which is where index-only blocking wastes work.
        """
        if self._direct_blocks is not None:
            return self._direct_blocks
        energies = self.energies
        n = energies.size
        span_cap = 4.0 * self.ebar_halfwidth
        lo, hi = self._alpha_lo, self._alpha_hi
        blocks = []
        b0 = int(self.cols.min())
        last = int(self.cols.max()) + 1
        while b0 < last:
            b1 = min(b0 + max_cols, last)
            cut = np.searchsorted(energies, energies[b0] + span_cap, side="right")
            b1 = max(b0 + 1, min(b1, int(cut)))
            touch = np.nonzero((lo < b1) & (hi > b0))[0]
            if touch.size:
                a0, a1 = int(touch[0]), int(touch[-1]) + 1
                alphas = np.arange(a0, a1)
                starts = np.maximum(lo[alphas], b0)
                ends = np.minimum(hi[alphas], b1)
                lens = np.maximum(ends - starts, 0)
                keep = lens > 0
                alphas, starts, lens = alphas[keep], starts[keep], lens[keep]
                if alphas.size:
                    rows = np.repeat(alphas - a0, lens).astype(np.int32)
                    base = np.repeat(starts, lens)
                    within = np.arange(lens.sum()) - np.repeat(
                        np.cumsum(lens) - lens, lens
                    )
                    cols_global = base + within
                    inv = 1.0 / (2.0 * self.bin_width)
                    bins = (
                        (energies[cols_global] - energies[rows + a0]) * inv
                    ).astype(np.int64)
                    blocks.append(
                        (a0, a1, b0, b1, rows,
                         (cols_global - b0).astype(np.int32), bins)
                    )
            b0 = b1
        self._direct_blocks = blocks
        return blocks

    def accumulate_from_factors(self, vecs, applied):
        """Per-bin sums of squares and fourth powers for one operator.

        ``applied`` is ``(op (x) 1) @ vecs``; elements are evaluated blockwise
        as ``vecs[:, rows].T @ applied[:, cols]``.
        """
        sums = np.zeros(self.n_bins)
        sumsqs = np.zeros(self.n_bins)
        for a0, a1, b0, b1, rows, cols, bins in self._build_direct_blocks():
            sub = vecs[:, a0:a1].T @ applied[:, b0:b1]
            s, q = accumulate_pairs(sub, rows, cols, bins, self.n_bins)
            sums += s
            sumsqs += q
        return sums, sumsqs

    def accumulate_dense(self, elements):
        """Same accumulation from a precomputed dense element matrix."""
        return accumulate_pairs(
            np.ascontiguousarray(elements), self.rows, self.cols, self.bins,
            self.n_bins,
        )

    def statistics(self, sums, sumsqs, n_ops: int) -> BinnedStatistics:
        """Pooled mean/std-err statistics from accumulated sums."""
        counts = self.pair_counts * n_ops
        keep = counts > 0
        n = counts[keep].astype(float)
        mean = sums[keep] / n
        var = np.maximum(sumsqs[keep] / n - mean**2, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            unbiased = np.where(n > 1, var * n / np.maximum(n - 1.0, 1.0), 0.0)
        std_err = np.sqrt(unbiased / n)
        mids = (np.nonzero(keep)[0] + 0.5) * self.bin_width
        return BinnedStatistics(
            ebar_center=self.ebar_center,
            ebar_halfwidth=self.ebar_halfwidth,
            omega_bin_width=self.bin_width,
            omega_mid=mids,
            mean_sq=mean,
            count=counts[keep],
            std_err=std_err,
        )


def bin_offdiagonal(
    elements: np.ndarray,
    spectrum: Spectrum,
    ebar_center: float,
    params: BinningParams = BinningParams(),
) -> BinnedStatistics:
    """Binned mean squared off-diagonal elements of one dense matrix.

    Pairs with mean energy inside the closed window accumulate ``|O_ab|^2``
    into bins of ``|omega| = |E_a - E_b| / 2``; each unordered pair counts
    once and the diagonal is excluded.
    """
    n = spectrum.dim
    if elements.shape != (n, n):
        raise DimensionError(
            f"elements shape {elements.shape} does not match spectrum dim {n}"
        )
    width = params.resolve_width(spectrum.spectral_range)
    band = PairBand(spectrum.eigenvalues, ebar_center, params.ebar_halfwidth, width)
    sums, sumsqs = band.accumulate_dense(elements)
    return band.statistics(sums, sumsqs, 1)


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Pooled ensemble statistics.

    ``binned`` holds one :class:`BinnedStatistics` per requested window;
    ``diagonals[k]`` is the full diagonal of operator ``k`` in the eigenbasis
    (cheap to carry, used by the Gibbs comparisons); ``sum_sq_rows[k]`` is
    ``sum_beta |O_ab|^2`` per alpha for the global sum rule.
    """

    binned: tuple[BinnedStatistics, ...]
    diagonals: np.ndarray
    sum_sq_rows: Optional[np.ndarray]


def run_ensemble(
    system: BipartiteSystem,
    ens: OperatorEnsembleSpec,
    ebar_centers: Sequence[float],
    params: BinningParams = BinningParams(),
    *,
    threads: int = 1,
    keep_sum_rule: bool = False,
) -> EnsembleResult:
    """Binned off-diagonal statistics pooled over the operator ensemble.

    When ``dim_a <= dim_b`` (the usual case) the grouped engine amortizes the
    band evaluation over all operators at once; otherwise elements are
    evaluated per operator.  Partial sums always merge in a fixed order, so
    results are identical for any thread count.  ``keep_sum_rule``
    additionally records per-row total squares from full element matrices
    (small systems only) and forces the per-operator path.
    """
    if ens.dim_a != system.dim_a:
        raise DimensionError(
            f"ensemble dim_a={ens.dim_a} does not match system dim_a={system.dim_a}"
        )
    vecs = system.spectrum_t.eigenvectors
    width = params.resolve_width(system.spectrum_t.spectral_range)
    bands = [
        PairBand(system.spectrum_t.eigenvalues, c, params.ebar_halfwidth, width)
        for c in ebar_centers
    ]
    ops = [sample_local_operator(ens, k) for k in range(ens.count)]

    if system.dim_a <= system.dim_b and not keep_sum_rule:
        v3 = np.ascontiguousarray(
            vecs.T.reshape(system.total_dim, system.dim_a, system.dim_b)
        )
        ops_flat = np.stack([op.ravel() for op in ops], axis=1)
        # Diagonals for every operator in one shot via the same transfer
        # matrices evaluated at alpha = beta.
        t_diag = np.matmul(v3, v3.transpose(0, 2, 1)).reshape(
            system.total_dim, system.dim_a * system.dim_a
        )
        diagonals = np.ascontiguousarray((t_diag @ ops_flat).T)
        binned = tuple(
            band.statistics(
                *band.accumulate_grouped_all(v3, ops_flat, threads=threads),
                ens.count,
            )
            for band in bands
        )
        return EnsembleResult(binned=binned, diagonals=diagonals, sum_sq_rows=None)

    def one_operator(index: int):
        op = ops[index]
        applied = _apply_a_factor(op, vecs, system.dim_a, system.dim_b)
        diag = np.einsum("ij,ij->j", vecs, applied, optimize=True)
        partials = [band.accumulate_from_factors(vecs, applied) for band in bands]
        rows = None
        if keep_sum_rule:
            g = vecs.T @ applied
            rows = (g**2).sum(axis=1)
        return partials, diag, rows

    results = [None] * ens.count
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for index, res in enumerate(pool.map(one_operator, range(ens.count))):
                results[index] = res
    else:
        for index in range(ens.count):
            results[index] = one_operator(index)

    sums = [np.zeros(band.n_bins) for band in bands]
    sumsqs = [np.zeros(band.n_bins) for band in bands]
    diagonals = np.empty((ens.count, system.total_dim))
    sum_sq_rows = np.empty((ens.count, system.total_dim)) if keep_sum_rule else None
    for index, (partials, diag, rows) in enumerate(results):
        for k, (s, q) in enumerate(partials):
            sums[k] += s
            sumsqs[k] += q
        diagonals[index] = diag
        if keep_sum_rule:
            sum_sq_rows[index] = rows
    binned = tuple(
        band.statistics(sums[k], sumsqs[k], ens.count)
        for k, band in enumerate(bands)
    )
    return EnsembleResult(binned=binned, diagonals=diagonals, sum_sq_rows=sum_sq_rows)


def subsystem_gap_omegas(energies_a: np.ndarray) -> np.ndarray:
    """Half-differences ``(E_i - E_j) / 2`` of a subsystem spectrum, ``i > j``.

    These are the omega locations where near-diagonal banding peaks are
    expected when the scrambling width is below the subsystem gaps.
    """
    e = np.sort(np.asarray(energies_a, dtype=float))
    diffs = [0.5 * (e[i] - e[j]) for j in range(e.size) for i in range(j + 1, e.size)]
    return np.unique(np.round(diffs, 12))


@dataclass(frozen=True, eq=False)
class BandReport:
    """Detected off-diagonal banding peaks matched against subsystem gaps."""

    peak_omegas: np.ndarray
    peak_values: np.ndarray
    prominences: np.ndarray
    gaps: np.ndarray
    matched: np.ndarray  # per peak: within 2 sigma_s of some gap
    gap_matched: np.ndarray  # per gap: some peak within 2 sigma_s
    sigma_s: float

    @property
    def matched_fraction(self) -> float:
        if self.peak_omegas.size == 0:
            return 0.0
        return float(self.matched.mean())

    @property
    def gap_coverage(self) -> float:
        if self.gaps.size == 0:
            return 0.0
        return float(self.gap_matched.mean())


def detect_bands(
    binned: BinnedStatistics, gaps: np.ndarray, sigma_s: float
) -> BandReport:
    """Find banding peaks in a binned curve and match them to gaps.

    Peaks are local maxima of ``mean_sq`` with prominence at least twice the
    median bin standard error; a peak matches when some gap (as omega) lies
    within ``2 sigma_s``.

    A subsystem operator only connects eigenstates whose energies differ by
    roughly a subsystem gap, broadened by the scrambling width, so the search
    is restricted to ``omega <= max(gaps) + 2 sigma_s``.  Beyond that the
    curve is statistical noise whose tiny standard errors would otherwise
    drag the median threshold down to the noise floor.
    """
    gaps = np.asarray(gaps, dtype=float)
    omega_mid = binned.omega_mid
    mean_sq = binned.mean_sq
    std_err = binned.std_err
    if gaps.size:
        cut = float(np.max(gaps)) + 2.0 * sigma_s
        keep = omega_mid <= cut
        omega_mid = omega_mid[keep]
        mean_sq = mean_sq[keep]
        std_err = std_err[keep]
    if omega_mid.size < 3:
        raise InsufficientDataError(
            f"need at least 3 bins to detect bands, got {omega_mid.size}"
        )
    threshold = 2.0 * float(np.median(std_err))
    idx, props = find_peaks(mean_sq, prominence=max(threshold, 1e-300))
    omegas = omega_mid[idx]
    if gaps.size and omegas.size:
        sep = np.abs(omegas[:, None] - gaps[None, :])
        matched = np.min(sep, axis=1) <= 2.0 * sigma_s
        gap_matched = np.min(sep, axis=0) <= 2.0 * sigma_s
    else:
        matched = np.zeros(omegas.size, dtype=bool)
        gap_matched = np.zeros(gaps.size, dtype=bool)
    return BandReport(
        peak_omegas=omegas,
        peak_values=mean_sq[idx],
        prominences=props["prominences"],
        gaps=gaps,
        matched=matched,
        gap_matched=gap_matched,
        sigma_s=float(sigma_s),
    )
