"""Operator localizability.

A symmetric operator on a ``total_dim``-dimensional space acts on an effective
local factor of dimension ``D = total_dim / gcd(multiplicities)``: a basis
rotation brings it to ``kron(local_block, identity)`` with a ``D x D``
diagonal block.  Nondegenerate spectra give ``D = total_dim`` (no locality);
a single-site Pauli operator embedded in a qubit register gives ``D = 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, LocalizationError, ValidationError
from .linalg import eig_sym

__all__ = ["LocalizabilityReport", "localizability", "localizing_basis"]


@dataclass(frozen=True)
class LocalizabilityReport:
    """Degeneracy classes of a spectrum and the implied local dimension."""

    classes: tuple[tuple[float, int], ...]  # (class value, multiplicity), ascending
    multiplicity_gcd: int
    local_dim: int
    total_dim: int


def _cluster(values: np.ndarray, tol: float):
    # Group sorted values whose consecutive gaps stay within tol * range.
    srt = np.sort(values)
    spread = float(srt[-1] - srt[0])
    if spread == 0.0:
        return [(float(srt.mean()), srt.size)]
    threshold = tol * spread
    breaks = np.nonzero(np.diff(srt) > threshold)[0]
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks + 1, [srt.size]))
    return [(float(srt[s:e].mean()), int(e - s)) for s, e in zip(starts, ends)]


def localizability(eigenvalues: np.ndarray, tol: float = 1e-9) -> LocalizabilityReport:
    """Degeneracy analysis of a spectrum.

    Eigenvalues are clustered with a relative tolerance ``tol`` (scaled by the
    spectral range); the local dimension is ``total / gcd`` of the class
    multiplicities.

    Parameters
    ----------
    eigenvalues : ndarray
        Non-empty, finite.
    tol : float
        Relative degeneracy tolerance, ``>= 0``.
    """
    vals = np.asarray(eigenvalues, dtype=float).ravel()
    if vals.size == 0:
        raise DimensionError("empty spectrum")
    if not np.all(np.isfinite(vals)):
        raise ValidationError("eigenvalues contain non-finite entries")
    if tol < 0:
        raise ValidationError("tol must be >= 0")
    classes = _cluster(vals, tol)
    g = 0
    for _, mult in classes:
        g = math.gcd(g, mult)
    return LocalizabilityReport(
        classes=tuple(classes),
        multiplicity_gcd=g,
        local_dim=vals.size // g,
        total_dim=int(vals.size),
    )


def localizing_basis(
    operator: np.ndarray,
    tol: float = 1e-9,
    *,
    block_dim: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal basis exhibiting the operator's local structure.

    Returns ``(basis, local_block)`` with ``basis.T @ operator @ basis ==
    kron(local_block, identity)`` up to the clustering tolerance, where
    ``local_block`` is diagonal with the distinct class values sorted
    ascending, each repeated ``multiplicity / gcd`` times.

    Parameters
    ----------
    operator : ndarray
        Real symmetric.
    tol : float
        Relative degeneracy tolerance passed to :func:`localizability`.
    block_dim : int, optional
        Expected local dimension.  When given, the clustered multiplicity
        structure must tile into blocks of ``total_dim / block_dim`` copies;
        a class that cannot be tiled raises :class:`LocalizationError` naming
        it.  Default: use the gcd-derived local dimension, which always tiles.
    """
    spec = eig_sym(operator)
    report = localizability(spec.eigenvalues, tol)
    total = report.total_dim
    if block_dim is None:
        copies = report.multiplicity_gcd
    else:
        if block_dim < 1 or total % block_dim != 0:
            raise LocalizationError(
                f"block_dim={block_dim} does not divide total dimension {total}"
            )
        copies = total // block_dim
        for value, mult in report.classes:
            if mult % copies != 0:
                raise LocalizationError(
                    f"eigenvalue class {value:.12g} has multiplicity {mult}, "
                    f"not a multiple of {copies}; the spectrum cannot tile "
                    f"into a {block_dim}-dimensional local block"
                )
    block_vals = np.concatenate(
        [np.full(mult // copies, value) for value, mult in report.classes]
    )
    local_block = np.diag(block_vals)
    # eig_sym returns ascending eigenvalues, which is exactly the column order
    # matching kron(local_block, identity_copies).
    return spec.eigenvectors, local_block
