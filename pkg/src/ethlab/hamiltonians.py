"""Hamiltonian construction.

Two families are provided: an open-boundary Ising chain in mixed transverse
and longitudinal fields (nonintegrable at the default couplings), and a fully
synthetic random-matrix family with diagonal subsystem Hamiltonians coupled by
a rotated random interaction.  Both can be split across a bipartition cut into
``H_T = H_A (x) 1 + 1 (x) H_B + H_I``.

Basis convention: computational basis states are indexed by integers whose
most significant bit is site 1 (the leftmost tensor factor); a cleared bit is
the +1 eigenstate of the local sigma_z.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, ValidationError
from .linalg import Spectrum, eig_sym

__all__ = [
    "MAX_CHAIN_SITES",
    "SpinChainParams",
    "RandomSystemParams",
    "BipartiteSystem",
    "build_spin_chain",
    "decompose_chain",
    "build_random_system",
    "make_bipartite",
    "sample_goe",
    "haar_orthogonal",
    "pauli",
    "site_operator",
]

# Dense diagonalization guard: 2^13 x 2^13 is the largest total dimension the
# desk-scale memory budget tolerates.
MAX_CHAIN_SITES = 13

# Real symmetric subset only; sigma_y is complex and never needed here.
PAULI = {
    "i": np.eye(2),
    "x": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]]),
}


def pauli(name: str) -> np.ndarray:
    """2x2 Pauli matrix (real symmetric subset: ``i``, ``x``, ``z``)."""
    key = name.lower()
    if key not in ("i", "x", "z"):
        raise ValidationError(f"unsupported Pauli label {name!r} (use i, x, z)")
    return PAULI[key].copy()


def site_operator(op: np.ndarray, site: int, sites: int) -> np.ndarray:
    """Embed a single-site operator at ``site`` (1-based) into ``sites`` qubits."""
    if not 1 <= site <= sites:
        raise ValidationError(f"site {site} outside 1..{sites}")
    left = np.eye(2 ** (site - 1))
    right = np.eye(2 ** (sites - site))
    return np.kron(np.kron(left, op), right)


@dataclass(frozen=True)
class SpinChainParams:
    """Open-boundary Ising chain in mixed fields.

    ``H = J sum_r sz_r sz_{r+1} + h_x sum_r sx_r + h_z sum_r sz_r``.
    The defaults put the chain at the standard strongly nonintegrable point.
    """

    sites: int
    coupling: float = 1.0
    field_x: float = 1.05
    field_z: float = 0.5
    max_sites: int = MAX_CHAIN_SITES

    def __post_init__(self):
        if self.sites < 1:
            raise ValidationError("chain needs at least one site")
        if self.sites > self.max_sites:
            raise ValidationError(
                f"sites={self.sites} exceeds the dense-diagonalization guard "
                f"({self.max_sites}); raise max_sites explicitly to override"
            )
        for name in ("coupling", "field_x", "field_z"):
            if not np.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")

    @property
    def dim(self) -> int:
        return 2**self.sites


def _sz_table(sites: int) -> np.ndarray:
    # sz eigenvalue of each site for every basis index; shape (sites, 2**sites).
    idx = np.arange(2**sites)
    bits = (idx[None, :] >> (sites - 1 - np.arange(sites)[:, None])) & 1
    return 1.0 - 2.0 * bits


def build_spin_chain(params: SpinChainParams) -> np.ndarray:
    """Dense Hamiltonian of the mixed-field Ising chain."""
    n = params.sites
    dim = params.dim
    sz = _sz_table(n)
    diag = params.field_z * sz.sum(axis=0)
    if n > 1:
        diag = diag + params.coupling * (sz[:-1] * sz[1:]).sum(axis=0)
    h = np.zeros((dim, dim))
    np.fill_diagonal(h, diag)
    idx = np.arange(dim)
    for r in range(n):
        flipped = idx ^ (1 << (n - 1 - r))
        h[idx, flipped] += params.field_x
    return h


@dataclass(frozen=True, eq=False)
class BipartiteSystem:
    """A total Hamiltonian split across a bipartition cut.

    ``h_i`` and ``h_t`` live on the full product space; ``h_t`` always equals
    ``kron(h_a, 1) + kron(1, h_b) + h_i`` to machine precision by
    construction.  Eigenvector matrices follow the sign convention of
    :func:`ethlab.linalg.eig_sym`.
    """

    dim_a: int
    dim_b: int
    h_a: np.ndarray
    h_b: np.ndarray
    h_i: np.ndarray
    h_t: np.ndarray
    spectrum_a: Spectrum
    spectrum_b: Spectrum
    spectrum_t: Spectrum
    interaction_norm: float

    @property
    def total_dim(self) -> int:
        return self.dim_a * self.dim_b

    def sum_energies(self) -> np.ndarray:
        """Noninteracting eigenvalues ``E_i^A + E_j^B`` as a (dim_a, dim_b) grid."""
        return np.add.outer(self.spectrum_a.eigenvalues, self.spectrum_b.eigenvalues)

    def spectrum_0(self) -> Spectrum:
        """Materialized eigendecomposition of the noninteracting part.

        Eigenvalues are the sorted subsystem energy sums and eigenvectors the
        matching product states.  Built on demand: at the largest supported
        sizes the kron is as large as ``h_t`` itself.
        """
        sums = self.sum_energies().ravel()
        order = np.argsort(sums, kind="stable")
        vecs = np.kron(self.spectrum_a.eigenvectors, self.spectrum_b.eigenvectors)
        return Spectrum(eigenvalues=sums[order], eigenvectors=vecs[:, order])


def _spectral_norm(h: np.ndarray) -> float:
    d = np.diag(np.diag(h))
    if np.array_equal(h, d):
        return float(np.max(np.abs(np.diag(h)))) if h.shape[0] else 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(h))))


def make_bipartite(
    h_a: np.ndarray,
    h_b: np.ndarray,
    h_i: np.ndarray,
    *,
    spectrum_t: Optional[Spectrum] = None,
) -> BipartiteSystem:
    """Assemble and diagonalize a bipartite system from its three pieces.

    ``spectrum_t`` may carry a precomputed (e.g. cached) eigendecomposition of
    the total Hamiltonian; it is trusted as-is.
    """
    dim_a = h_a.shape[0]
    dim_b = h_b.shape[0]
    total = dim_a * dim_b
    if h_i.shape != (total, total):
        raise DimensionError(
            f"interaction shape {h_i.shape} does not match product dim {total}"
        )
    h_t = np.kron(h_a, np.eye(dim_b)) + np.kron(np.eye(dim_a), h_b) + h_i
    spec_a = eig_sym(h_a)
    spec_b = eig_sym(h_b)
    spec_t = spectrum_t if spectrum_t is not None else eig_sym(h_t, check=False)
    return BipartiteSystem(
        dim_a=dim_a,
        dim_b=dim_b,
        h_a=h_a,
        h_b=h_b,
        h_i=h_i,
        h_t=h_t,
        spectrum_a=spec_a,
        spectrum_b=spec_b,
        spectrum_t=spec_t,
        interaction_norm=_spectral_norm(h_i),
    )


def decompose_chain(
    params: SpinChainParams,
    cut: int,
    *,
    spectrum_t: Optional[Spectrum] = None,
) -> BipartiteSystem:
    """Split the chain after site ``cut`` into subsystems plus the cut bond.

    ``H_A`` and ``H_B`` are the chain Hamiltonians of the two fragments
    (bonds interior to each side, all fields); ``H_I`` is the single coupling
    term across the cut.  The reassembled total is the full chain.
    """
    if not 1 <= cut <= params.sites - 1:
        raise ValidationError(f"cut={cut} outside 1..{params.sites - 1}")
    a_params = SpinChainParams(
        sites=cut,
        coupling=params.coupling,
        field_x=params.field_x,
        field_z=params.field_z,
        max_sites=params.max_sites,
    )
    b_params = SpinChainParams(
        sites=params.sites - cut,
        coupling=params.coupling,
        field_x=params.field_x,
        field_z=params.field_z,
        max_sites=params.max_sites,
    )
    h_a = build_spin_chain(a_params)
    h_b = build_spin_chain(b_params)
    # Cut bond J sz_{cut} sz_{cut+1}: kron of two diagonal sz embeddings.
    sz_a_last = np.kron(np.ones(2 ** (cut - 1)), np.array([1.0, -1.0]))
    sz_b_first = np.kron(np.array([1.0, -1.0]), np.ones(2 ** (params.sites - cut - 1)))
    diag = params.coupling * np.kron(sz_a_last, sz_b_first)
    h_i = np.diag(diag)
    return make_bipartite(h_a, h_b, h_i, spectrum_t=spectrum_t)


@dataclass(frozen=True)
class RandomSystemParams:
    """Synthetic bipartite system with diagonal GOE-spectrum subsystems.

    ``sites_a``/``sites_b`` set the subsystem dimensions ``2**sites``; the
    interaction acts on ``sites_i`` qubits straddling the cut
    (``floor(sites_i / 2)`` of them on the A side) and is rescaled so that
    ``|H_I| / |H_0| = interaction_fraction`` in spectral norm.  ``a_scale``
    multiplies the A spectrum, widening it relative to B.
    """

    sites_a: int
    sites_b: int
    sites_i: int
    interaction_fraction: float
    seed: int
    a_scale: float = 1.0

    def __post_init__(self):
        if min(self.sites_a, self.sites_b, self.sites_i) < 1:
            raise ValidationError("sites_a, sites_b, sites_i must all be >= 1")
        if self.sites_a + self.sites_b > MAX_CHAIN_SITES:
            raise ValidationError(
                f"total sites {self.sites_a + self.sites_b} exceeds the "
                f"dense-diagonalization guard ({MAX_CHAIN_SITES})"
            )
        if self.sites_i // 2 > self.sites_a or (self.sites_i + 1) // 2 > self.sites_b:
            raise ValidationError(
                "interaction qubits do not fit the bipartition: need "
                "floor(sites_i/2) <= sites_a and ceil(sites_i/2) <= sites_b"
            )
        if self.interaction_fraction < 0 or not np.isfinite(self.interaction_fraction):
            raise ValidationError("interaction_fraction must be finite and >= 0")
        if self.a_scale <= 0 or not np.isfinite(self.a_scale):
            raise ValidationError("a_scale must be finite and > 0")


def sample_goe(dim: int, rng: np.random.Generator) -> np.ndarray:
    """One draw from the Gaussian orthogonal ensemble.

    ``(G + G.T) / 2`` with ``G`` standard normal: unit variance on the
    diagonal, variance 1/2 off it.  The overall scale is arbitrary for every
    use in this package (spectra get rescaled downstream).
    """
    if dim < 1:
        raise DimensionError("dim must be >= 1")
    g = rng.standard_normal((dim, dim))
    return 0.5 * (g + g.T)


def haar_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix via sign-fixed QR."""
    if dim < 1:
        raise DimensionError("dim must be >= 1")
    g = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def build_random_system(
    params: RandomSystemParams,
    *,
    spectrum_t: Optional[Spectrum] = None,
) -> BipartiteSystem:
    """Build the random bipartite family from a single seed.

    Sampling order (fixed for reproducibility): GOE spectrum for ``H_A``, GOE
    spectrum for ``H_B``, GOE spectrum for the interaction block, then the two
    Haar rotations.  ``H_A`` and ``H_B`` are diagonal with sorted spectra; the
    interaction is a diagonal random spectrum on the straddling qubits rotated
    by independent Haar orthogonals on each side and rescaled to the requested
    relative spectral norm.
    """
    rng = np.random.default_rng(params.seed)
    dim_a = 2**params.sites_a
    dim_b = 2**params.sites_b
    ia = params.sites_i // 2
    ib = params.sites_i - ia
    spec_a = params.a_scale * np.sort(np.linalg.eigvalsh(sample_goe(dim_a, rng)))
    spec_b = np.sort(np.linalg.eigvalsh(sample_goe(dim_b, rng)))
    spec_i = np.sort(np.linalg.eigvalsh(sample_goe(2**params.sites_i, rng)))
    rot_a = haar_orthogonal(dim_a, rng)
    rot_b = haar_orthogonal(dim_b, rng)

    h_a = np.diag(spec_a)
    h_b = np.diag(spec_b)
    # Interaction spectrum on the straddling qubits, embedded diagonally.
    mid = np.kron(
        np.ones(2 ** (params.sites_a - ia)),
        np.kron(spec_i, np.ones(2 ** (params.sites_b - ib))),
    )
    norm_h0 = float(np.max(np.abs(np.add.outer(spec_a, spec_b))))
    norm_mid = float(np.max(np.abs(spec_i)))
    if params.interaction_fraction == 0.0 or norm_mid == 0.0:
        scale = 0.0
    else:
        scale = params.interaction_fraction * norm_h0 / norm_mid
    rot = np.kron(rot_a, rot_b)
    h_i = (rot * (scale * mid)) @ rot.T
    h_i = 0.5 * (h_i + h_i.T)
    return make_bipartite(h_a, h_b, h_i, spectrum_t=spectrum_t)


def chain_reference_params() -> SpinChainParams:
    """The 12-site chain at the default couplings (the desk-scale reference)."""
    return SpinChainParams(sites=12)
