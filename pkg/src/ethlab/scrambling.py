"""Eigenstate scrambling statistics.

The central object is the overlap tensor ``c[alpha, i, j]`` between the
interacting eigenstates of a bipartite system and the product eigenstates of
its noninteracting part.  Squared overlaps form a doubly stochastic matrix;
their spread in the energy offset ``E_alpha - E_i - E_j`` defines the
scrambling width ``sigma_S`` that parametrizes every prediction downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyWindowError, ValidationError
from .hamiltonians import BipartiteSystem

__all__ = [
    "ScramblingCoefficients",
    "ScramblingProfile",
    "compute_coefficients",
    "profile",
    "exp_profile",
    "flat_profile",
]

SQRT2 = float(np.sqrt(2.0))
SQRT3 = float(np.sqrt(3.0))


@dataclass(frozen=True, eq=False)
class ScramblingCoefficients:
    """Overlaps ``c[alpha, i, j] = <E_i^A, E_j^B | E_alpha>``.

    ``tensor`` has shape ``(total_dim, dim_a, dim_b)``; slices over ``alpha``
    are unit-norm, and summing ``c**2`` over ``alpha`` gives 1 for every
    ``(i, j)`` as well (double stochasticity).
    """

    tensor: np.ndarray
    energies_total: np.ndarray
    energies_a: np.ndarray
    energies_b: np.ndarray

    @property
    def total_dim(self) -> int:
        return self.tensor.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        return self.tensor.shape[1], self.tensor.shape[2]

    def sum_energies(self) -> np.ndarray:
        """Product-state energies ``E_i^A + E_j^B`` on the (i, j) grid."""
        return np.add.outer(self.energies_a, self.energies_b)

    def offsets(self, alphas=None) -> np.ndarray:
        """Energy offsets ``E_alpha - (E_i^A + E_j^B)``.

        The subtraction keeps the product-state sum parenthesized so systems
        whose total Hamiltonian is exactly noninteracting produce exact zeros
        where ``c`` is nonzero.
        """
        e_t = self.energies_total if alphas is None else self.energies_total[alphas]
        return e_t[:, None, None] - self.sum_energies()[None, :, :]

    def to_sparse_triplets(self, threshold: float = 1e-12):
        """Entries with ``|c| > threshold`` as ``(alpha, i, j, value)`` arrays."""
        keep = np.abs(self.tensor) > threshold
        alpha, i, j = np.nonzero(keep)
        return alpha, i, j, self.tensor[alpha, i, j]


def compute_coefficients(system: BipartiteSystem) -> ScramblingCoefficients:
    """Overlap tensor between interacting and product eigenstates.

    Contracts the subsystem eigenvector matrices against the total ones
    factor-by-factor, which costs ``O(dim_a * dim_b**2 * total)`` instead of
    materializing the ``total x total`` Kronecker product.
    """
    v_t = system.spectrum_t.eigenvectors
    v_a = system.spectrum_a.eigenvectors
    v_b = system.spectrum_b.eigenvectors
    dim_a, dim_b = system.dim_a, system.dim_b
    total = system.total_dim
    # v_t rows are product-basis indices (a-major); peel the two factors.
    vt3 = v_t.reshape(dim_a, dim_b, total)
    x = np.tensordot(v_a.T, vt3, axes=(1, 0))  # (i, b_raw, alpha)
    y = np.einsum("qj,iqa->aij", v_b, x, optimize=True)
    return ScramblingCoefficients(
        tensor=np.ascontiguousarray(y),
        energies_total=system.spectrum_t.eigenvalues,
        energies_a=system.spectrum_a.eigenvalues,
        energies_b=system.spectrum_b.eigenvalues,
    )


@dataclass(frozen=True, eq=False)
class ScramblingProfile:
    """Fitted energy profile of the squared scrambling coefficients.

    ``sigma_S`` is the ``c**2``-weighted standard deviation of the energy
    offsets over eigenstates in the central spectral window.  ``fit_form``
    selects the normalized profile shape ``h``: ``"exponential"`` for
    ``exp(-sqrt(2) |E| / sigma_S)`` or ``"flat_window"`` for an indicator of
    half-width ``sqrt(3) sigma_S`` (both carrying the same second moment).
    """

    offsets: np.ndarray  # bin centers
    mean_sq: np.ndarray  # mean of c**2 per offset bin (NaN where empty)
    sigma_s: float
    fit_form: str
    window: tuple[float, float]
    states_in_window: int

    @property
    def delta(self) -> float:
        """Full width ``2 sqrt(3) sigma_S`` of the moment-matched flat window."""
        return 2.0 * SQRT3 * self.sigma_s

    @property
    def normalization(self) -> float:
        """Integral ``N_h`` of the fitted profile."""
        if self.fit_form == "exponential":
            return SQRT2 * self.sigma_s
        return self.delta

    def h(self, energy):
        """Fitted profile, ``h(0) = 1``."""
        if self.fit_form == "exponential":
            return exp_profile(self.sigma_s)(energy)
        return flat_profile(self.delta)(energy)


def exp_profile(sigma_s: float):
    """Exponential scrambling profile ``exp(-sqrt(2)|E|/sigma_s)``."""
    if sigma_s <= 0:
        raise ValidationError("sigma_s must be positive for the exponential profile")
    rate = SQRT2 / sigma_s

    def h(energy):
        return np.exp(-rate * np.abs(energy))

    return h


def flat_profile(delta: float):
    """Indicator profile of full width ``delta`` (closed window)."""
    if delta < 0:
        raise ValidationError("delta must be >= 0")
    half = 0.5 * delta

    def h(energy):
        return (np.abs(energy) <= half).astype(float)

    return h


def profile(
    coeffs: ScramblingCoefficients,
    center_fraction: float = 0.5,
    *,
    fit_form: str = "exponential",
    bins: int = 201,
) -> ScramblingProfile:
    """Scrambling width and binned coefficient profile.

    Parameters
    ----------
    coeffs : ScramblingCoefficients
    center_fraction : float
        Fraction of the total spectral range (centered) whose eigenstates
        enter the statistics; in (0, 1].
    fit_form : {"exponential", "flat_window"}
    bins : int
        Offset bins for the diagnostic ``mean_sq`` curve, spanning plus/minus
        six sigma (or the full offset range if smaller).
    """
    if not 0 < center_fraction <= 1:
        raise ValidationError("center_fraction must be in (0, 1]")
    if fit_form not in ("exponential", "flat_window"):
        raise ValidationError(f"unknown fit_form {fit_form!r}")
    e_t = coeffs.energies_total
    lo_e, hi_e = float(e_t[0]), float(e_t[-1])
    margin = 0.5 * (1.0 - center_fraction) * (hi_e - lo_e)
    window = (lo_e + margin, hi_e - margin)
    sel = np.nonzero((e_t >= window[0]) & (e_t <= window[1]))[0]
    if sel.size == 0:
        raise EmptyWindowError(
            f"no eigenstates inside the central window {window}"
        )
    offs = coeffs.offsets(sel)
    weights = coeffs.tensor[sel] ** 2
    total_weight = float(weights.sum())  # = number of selected states
    second = float((weights * offs**2).sum())
    sigma_s = float(np.sqrt(second / total_weight))

    span = 6.0 * sigma_s if sigma_s > 0 else 1.0
    span = min(span, float(np.max(np.abs(offs)))) or 1.0
    edges = np.linspace(-span, span, bins + 1)
    flat_offs = offs.ravel()
    flat_w = weights.ravel()
    idx = np.clip(np.searchsorted(edges, flat_offs, side="right") - 1, 0, bins - 1)
    inside = (flat_offs >= edges[0]) & (flat_offs <= edges[-1])
    sums = np.bincount(idx[inside], weights=flat_w[inside], minlength=bins)
    counts = np.bincount(idx[inside], minlength=bins)
    with np.errstate(invalid="ignore"):
        mean_sq = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return ScramblingProfile(
        offsets=centers,
        mean_sq=mean_sq,
        sigma_s=sigma_s,
        fit_form=fit_form,
        window=window,
        states_in_window=int(sel.size),
    )
