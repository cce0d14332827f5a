"""Chain construction, bipartite assembly, random-matrix sampling."""

import numpy as np
import pytest

from ethlab.errors import DimensionError, ValidationError
from ethlab.hamiltonians import (
    RandomSystemParams,
    SpinChainParams,
    build_random_system,
    build_spin_chain,
    decompose_chain,
    haar_orthogonal,
    make_bipartite,
    pauli,
    sample_goe,
    site_operator,
)

# Ground-state energy of the 12-site default chain, frozen from the dense
# diagonalization (independent builds agree to every printed digit).
E_MIN_12 = -15.7082937346734
SPECTRAL_RANGE_12 = 35.65407177371265


def _chain_by_hand(params):
    # Independent construction from explicit Kronecker products.
    n = params.sites
    h = np.zeros((2**n, 2**n))
    for r in range(1, n + 1):
        h += params.field_x * site_operator(pauli("x"), r, n)
        h += params.field_z * site_operator(pauli("z"), r, n)
    for r in range(1, n):
        zz = site_operator(pauli("z"), r, n) @ site_operator(pauli("z"), r + 1, n)
        h += params.coupling * zz
    return h


def test_chain_matches_kronecker_construction():
    for sites in (1, 2, 3, 6):
        params = SpinChainParams(sites, coupling=0.9, field_x=1.3, field_z=-0.4)
        # Summation order differs between the two constructions, so demand
        # agreement to a few ulps rather than byte equality.
        diff = np.abs(build_spin_chain(params) - _chain_by_hand(params)).max()
        assert diff < 1e-13


def test_chain_two_site_analytic_entries():
    # J sz sz + hx (sx1 + sx2) + hz (sz1 + sz2) in the computational basis.
    h = build_spin_chain(SpinChainParams(2, coupling=2.0, field_x=3.0, field_z=5.0))
    expected = np.array(
        [
            [2.0 + 10.0, 3.0, 3.0, 0.0],
            [3.0, -2.0, 0.0, 3.0],
            [3.0, 0.0, -2.0, 3.0],
            [0.0, 3.0, 3.0, 2.0 - 10.0],
        ]
    )
    assert np.array_equal(h, expected)


def test_chain_params_validation():
    with pytest.raises(ValidationError):
        SpinChainParams(0)
    with pytest.raises(ValidationError):
        SpinChainParams(20)
    with pytest.raises(ValidationError):
        SpinChainParams(4, field_x=np.inf)
    # The guard is explicit, not absolute.
    assert SpinChainParams(14, max_sites=14).dim == 2**14


def test_site_operator_bounds():
    with pytest.raises(ValidationError):
        site_operator(pauli("x"), 0, 3)
    with pytest.raises(ValidationError):
        site_operator(pauli("x"), 4, 3)
    with pytest.raises(ValidationError):
        pauli("y")


def test_chain12_frozen_spectrum_endpoints(chain12):
    e = chain12.spectrum_t.eigenvalues
    assert e[0] == pytest.approx(E_MIN_12, abs=1e-9)
    assert chain12.spectrum_t.spectral_range == pytest.approx(
        SPECTRAL_RANGE_12, abs=1e-9
    )


def test_reassembly_identity_chain(chain12, chain10):
    # kron(H_A, 1) + kron(1, H_B) + H_I reproduces H_T to machine precision.
    for system in (chain12, chain10):
        total = (
            np.kron(system.h_a, np.eye(system.dim_b))
            + np.kron(np.eye(system.dim_a), system.h_b)
            + system.h_i
        )
        scale = np.abs(system.h_t).max()
        assert np.abs(total - system.h_t).max() <= 1e-12 * scale


def test_decompose_chain_fragments_are_chains():
    # Each fragment of the cut chain is itself an open chain at the same
    # couplings; the interaction is the single cut bond.
    params = SpinChainParams(6)
    system = decompose_chain(params, 2)
    assert np.array_equal(
        system.h_a, build_spin_chain(SpinChainParams(2))
    )
    assert np.array_equal(
        system.h_b, build_spin_chain(SpinChainParams(4))
    )
    bond = params.coupling * np.kron(
        site_operator(pauli("z"), 2, 2), site_operator(pauli("z"), 1, 4)
    )
    assert np.array_equal(system.h_i, bond)


def test_decompose_chain_cut_validation():
    with pytest.raises(ValidationError):
        decompose_chain(SpinChainParams(6), 0)
    with pytest.raises(ValidationError):
        decompose_chain(SpinChainParams(6), 6)


def test_cut_bond_squared_is_identity():
    # The cut-bond interaction squares to J^2 times the identity.
    system = decompose_chain(SpinChainParams(8), 3)
    sq = system.h_i @ system.h_i
    assert np.abs(sq - np.eye(system.total_dim)).max() < 1e-14


def test_make_bipartite_validation():
    h2 = np.eye(2)
    with pytest.raises(DimensionError):
        make_bipartite(h2, h2, np.eye(3))
    with pytest.raises(ValidationError):
        make_bipartite(np.array([[0.0, 1.0], [0.5, 0.0]]), h2, np.eye(4))


def test_sum_energies_outer_sum():
    system = decompose_chain(SpinChainParams(5), 2)
    sums = system.sum_energies()
    e_a = system.spectrum_a.eigenvalues
    e_b = system.spectrum_b.eigenvalues
    assert sums.shape == (4, 8)
    assert np.array_equal(sums, np.add.outer(e_a, e_b))


def test_goe_symmetry_and_variances():
    rng = np.random.default_rng(2)
    dim = 400
    g = sample_goe(dim, rng)
    assert np.array_equal(g, g.T)
    diag_var = g[np.diag_indices(dim)].var()
    off = g[np.triu_indices(dim, k=1)]
    # Diagonal variance 1, off-diagonal 1/2, up to sampling noise.
    assert diag_var == pytest.approx(1.0, rel=0.2)
    assert off.var() == pytest.approx(0.5, rel=0.05)


def test_goe_determinism_and_validation():
    a = sample_goe(16, np.random.default_rng(9))
    b = sample_goe(16, np.random.default_rng(9))
    assert np.array_equal(a, b)
    with pytest.raises(DimensionError):
        sample_goe(0, np.random.default_rng(0))


def test_haar_orthogonal_properties():
    rng = np.random.default_rng(4)
    for dim in (1, 2, 7, 40):
        q = haar_orthogonal(dim, rng)
        assert np.abs(q.T @ q - np.eye(dim)).max() < 1e-12
        assert abs(abs(np.linalg.det(q)) - 1.0) < 1e-12


def test_haar_orthogonal_column_statistics():
    # Entries of a Haar column have mean square 1/dim.
    rng = np.random.default_rng(8)
    dim, draws = 24, 200
    acc = np.zeros(dim)
    for _ in range(draws):
        acc += haar_orthogonal(dim, rng)[:, 0] ** 2
    assert np.allclose(acc / draws, 1.0 / dim, atol=0.01)


def test_random_system_interaction_fraction():
    params = RandomSystemParams(
        sites_a=2, sites_b=5, sites_i=3, interaction_fraction=0.05, seed=3
    )
    system = build_random_system(params)
    h_0 = system.h_t - system.h_i
    ratio = np.linalg.norm(system.h_i, 2) / np.linalg.norm(h_0, 2)
    assert ratio == pytest.approx(0.05, rel=1e-10)
    assert system.interaction_norm == pytest.approx(
        np.linalg.norm(system.h_i, 2), rel=1e-10
    )


def test_random_system_determinism_and_a_scale():
    params = RandomSystemParams(
        sites_a=2, sites_b=4, sites_i=2, interaction_fraction=0.02, seed=11
    )
    s1 = build_random_system(params)
    s2 = build_random_system(params)
    assert np.array_equal(s1.h_t, s2.h_t)
    wide = build_random_system(
        RandomSystemParams(
            sites_a=2,
            sites_b=4,
            sites_i=2,
            interaction_fraction=0.02,
            seed=11,
            a_scale=3.0,
        )
    )
    assert wide.spectrum_a.spectral_range == pytest.approx(
        3.0 * s1.spectrum_a.spectral_range, rel=1e-12
    )


def test_random_system_validation():
    with pytest.raises(ValidationError):
        RandomSystemParams(
            sites_a=0, sites_b=4, sites_i=2, interaction_fraction=0.1, seed=0
        )
    with pytest.raises(ValidationError):
        RandomSystemParams(
            sites_a=2, sites_b=4, sites_i=2, interaction_fraction=-0.5, seed=0
        )
    with pytest.raises(ValidationError):
        RandomSystemParams(
            sites_a=2, sites_b=2, sites_i=5, interaction_fraction=0.1, seed=0
        )
