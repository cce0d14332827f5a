"""Operator ensembles, off-diagonal binning, band detection."""

import numpy as np
import pytest

from ethlab.errors import (
    DimensionError,
    EmptyWindowError,
    InsufficientDataError,
    ValidationError,
)
from ethlab.experiments import (
    REFERENCE_SPECTRAL_RANGE,
    BinnedStatistics,
    BinningParams,
    OperatorEnsembleSpec,
    bin_offdiagonal,
    default_bin_width,
    detect_bands,
    matrix_elements_total_basis,
    run_ensemble,
    sample_local_operator,
    subsystem_gap_omegas,
)
from ethlab.figures import quantile_states
from ethlab.hamiltonians import SpinChainParams, decompose_chain, make_bipartite
from ethlab.kernels import (
    accumulate_grouped_numba,
    accumulate_grouped_numpy,
    accumulate_pairs_numba,
    accumulate_pairs_numpy,
    window_counts_numba,
    window_counts_numpy,
)
from ethlab.linalg import Spectrum


def test_sample_local_operator_normalization():
    spec = OperatorEnsembleSpec(dim_a=8, count=10, seed=4)
    for k in range(spec.count):
        op = sample_local_operator(spec, k)
        assert np.array_equal(op, op.T)
        vals = np.linalg.eigvalsh(op)
        assert abs(vals.mean()) < 1e-12
        assert (vals**2).mean() == pytest.approx(1.0, rel=1e-12)
        assert abs(np.trace(op)) < 1e-10


def test_sample_local_operator_determinism_and_streams():
    spec = OperatorEnsembleSpec(dim_a=4, count=5, seed=1)
    a = sample_local_operator(spec, 2)
    b = sample_local_operator(spec, 2)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_local_operator(spec, 3))
    other_seed = OperatorEnsembleSpec(dim_a=4, count=5, seed=2)
    assert not np.array_equal(a, sample_local_operator(other_seed, 2))


def test_sample_local_operator_validation():
    spec = OperatorEnsembleSpec(dim_a=4, count=3, seed=0)
    with pytest.raises(ValidationError):
        sample_local_operator(spec, 3)
    with pytest.raises(ValidationError):
        sample_local_operator(spec, -1)
    with pytest.raises(ValidationError):
        OperatorEnsembleSpec(dim_a=4, count=0)
    with pytest.raises(ValidationError):
        OperatorEnsembleSpec(dim_a=1, count=2)
    with pytest.raises(ValidationError):
        OperatorEnsembleSpec(dim_a=4, count=2, spectrum_law="gue")


def test_matrix_elements_identity_and_invariants():
    system = decompose_chain(SpinChainParams(6), 2)
    # The identity on A embeds to the identity in any basis.
    ident = matrix_elements_total_basis(system, np.eye(4))
    assert np.abs(ident - np.eye(64)).max() < 1e-12
    rng = np.random.default_rng(3)
    g = rng.standard_normal((4, 4))
    op = 0.5 * (g + g.T)
    el = matrix_elements_total_basis(system, op)
    # Orthogonal conjugation preserves the Frobenius norm and the trace.
    assert np.linalg.norm(el) == pytest.approx(
        np.sqrt(16.0) * np.linalg.norm(op), rel=1e-12
    )
    assert np.trace(el) == pytest.approx(16.0 * np.trace(op), rel=1e-10)
    with pytest.raises(DimensionError):
        matrix_elements_total_basis(system, np.eye(3))


def test_matrix_elements_noninteracting_selection_rule():
    # Without interaction the eigenstates are products, so an A-side operator
    # cannot connect states with different B labels.
    rng = np.random.default_rng(8)
    h_a = np.diag([0.0, 1.0, 2.5, 4.7])
    h_b = np.diag([0.0, 10.0, 20.0, 31.0])
    system = make_bipartite(h_a, h_b, np.zeros((16, 16)))
    g = rng.standard_normal((4, 4))
    op = 0.5 * (g + g.T)
    el = matrix_elements_total_basis(system, op)
    e_t = system.spectrum_t.eigenvalues
    # B label of each total eigenstate from its energy decade.
    b_label = np.round(e_t / 10.0 - 0.2).astype(int)
    cross = b_label[:, None] != b_label[None, :]
    assert np.abs(el[cross]).max() < 1e-12


def test_default_bin_width_reference():
    assert default_bin_width(REFERENCE_SPECTRAL_RANGE) == 0.015
    assert default_bin_width(2.0 * REFERENCE_SPECTRAL_RANGE) == 0.03
    params = BinningParams()
    assert params.resolve_width(REFERENCE_SPECTRAL_RANGE) == 0.015
    assert BinningParams(omega_bin_width=0.02).resolve_width(100.0) == 0.02


def test_binning_params_validation():
    with pytest.raises(ValidationError):
        BinningParams(ebar_halfwidth=0.0)
    with pytest.raises(ValidationError):
        BinningParams(omega_bin_width=-0.015)


def test_bin_offdiagonal_identity_elements_are_zero():
    spectrum = Spectrum(
        eigenvalues=np.linspace(-1.0, 1.0, 32), eigenvectors=np.eye(32)
    )
    stats = bin_offdiagonal(
        np.eye(32), spectrum, 0.0, BinningParams(omega_bin_width=0.05)
    )
    assert stats.n_samples > 0
    assert np.all(stats.mean_sq == 0.0)
    assert np.all(stats.std_err == 0.0)


def test_bin_offdiagonal_single_pair():
    spectrum = Spectrum(
        eigenvalues=np.array([-1.0, 1.0]), eigenvectors=np.eye(2)
    )
    elements = np.array([[0.3, 0.5], [0.5, -0.2]])
    stats = bin_offdiagonal(
        elements, spectrum, 0.0, BinningParams(omega_bin_width=0.4)
    )
    # One unordered pair at omega = 1, |O|^2 = 0.25; the diagonal is excluded.
    assert stats.omega_mid.shape == (1,)
    assert stats.omega_mid[0] == pytest.approx(1.0)
    assert stats.mean_sq[0] == pytest.approx(0.25, rel=1e-14)
    assert stats.count[0] == 1
    assert stats.std_err[0] == 0.0
    assert stats.n_samples == 1


def test_bin_offdiagonal_window_is_closed():
    spectrum = Spectrum(
        eigenvalues=np.array([-1.0, 3.0]), eigenvectors=np.eye(2)
    )
    elements = np.full((2, 2), 0.5)
    # Pair mean energy is exactly at the window edge: 1.0 = 0.5 + 0.5.
    stats = bin_offdiagonal(
        elements, spectrum, 0.5, BinningParams(omega_bin_width=1.0)
    )
    assert stats.n_samples == 1
    with pytest.raises(EmptyWindowError):
        bin_offdiagonal(
            elements, spectrum, 10.0, BinningParams(omega_bin_width=1.0)
        )


def test_bin_offdiagonal_matches_brute_force():
    rng = np.random.default_rng(12)
    n = 40
    e = np.sort(rng.uniform(-3.0, 3.0, n))
    spectrum = Spectrum(eigenvalues=e, eigenvectors=np.eye(n))
    g = rng.standard_normal((n, n))
    elements = 0.5 * (g + g.T)
    width = 0.13
    center, hw = 0.2, 0.9
    stats = bin_offdiagonal(
        elements, spectrum, center,
        BinningParams(ebar_halfwidth=hw, omega_bin_width=width),
    )
    sums = {}
    for a in range(n):
        for b in range(a + 1, n):
            if abs(0.5 * (e[a] + e[b]) - center) <= hw:
                idx = int((e[b] - e[a]) / (2.0 * width))
                sums.setdefault(idx, []).append(elements[a, b] ** 2)
    assert stats.omega_mid.tolist() == [
        (k + 0.5) * width for k in sorted(sums)
    ]
    for mid, mean, count, se in zip(
        stats.omega_mid, stats.mean_sq, stats.count, stats.std_err
    ):
        vals = np.array(sums[int(mid / width)])
        assert count == vals.size
        assert mean == pytest.approx(vals.mean(), rel=1e-12)
        if vals.size > 1:
            expected_se = vals.std(ddof=1) / np.sqrt(vals.size)
            assert se == pytest.approx(expected_se, rel=1e-10)
        else:
            assert se == 0.0


def test_bin_offdiagonal_shape_mismatch():
    spectrum = Spectrum(
        eigenvalues=np.array([-1.0, 1.0]), eigenvectors=np.eye(2)
    )
    with pytest.raises(DimensionError):
        bin_offdiagonal(np.eye(3), spectrum, 0.0)


def test_run_ensemble_thread_count_is_bitwise_invisible():
    system = decompose_chain(SpinChainParams(8), 3)
    spec = OperatorEnsembleSpec(dim_a=8, count=8, seed=0)
    r1 = run_ensemble(system, spec, [0.0], BinningParams(), threads=1)
    r2 = run_ensemble(system, spec, [0.0], BinningParams(), threads=3)
    for s1, s2 in zip(r1.binned, r2.binned):
        assert np.array_equal(s1.mean_sq, s2.mean_sq)
        assert np.array_equal(s1.std_err, s2.std_err)
        assert np.array_equal(s1.count, s2.count)
    assert np.array_equal(r1.diagonals, r2.diagonals)


def test_run_ensemble_engines_agree():
    # keep_sum_rule forces the per-operator engine; the grouped engine must
    # produce the same statistics up to summation-order roundoff.
    system = decompose_chain(SpinChainParams(8), 3)
    spec = OperatorEnsembleSpec(dim_a=8, count=6, seed=2)
    grouped = run_ensemble(system, spec, [0.0], BinningParams())
    direct = run_ensemble(
        system, spec, [0.0], BinningParams(), keep_sum_rule=True
    )
    sg, sd = grouped.binned[0], direct.binned[0]
    assert np.array_equal(sg.count, sd.count)
    assert np.abs(sg.mean_sq - sd.mean_sq).max() < 1e-12 * sg.mean_sq.max()
    assert np.allclose(sg.std_err, sd.std_err, rtol=1e-8, atol=1e-18)


def test_run_ensemble_sum_rule_and_diagonals():
    system = decompose_chain(SpinChainParams(8), 3)
    spec = OperatorEnsembleSpec(dim_a=8, count=4, seed=5)
    res = run_ensemble(
        system, spec, [0.0], BinningParams(), keep_sum_rule=True
    )
    assert res.sum_sq_rows.shape == (4, 256)
    assert res.diagonals.shape == (4, 256)
    for k in range(spec.count):
        op = sample_local_operator(spec, k)
        el = matrix_elements_total_basis(system, op)
        # Global sum rule: row sums of squares equal the diagonal of O^2.
        sq_diag = np.diag(matrix_elements_total_basis(system, op @ op))
        assert np.abs(res.sum_sq_rows[k] - sq_diag).max() < 1e-8
        assert np.abs((el**2).sum(axis=1) - sq_diag).max() < 1e-8
        assert np.abs(res.diagonals[k] - np.diag(el)).max() < 1e-12


def test_run_ensemble_signed_means_are_unbiased():
    # The non-squared off-diagonal elements average to zero bin by bin:
    # with >= 100 pooled samples per bin, at most the expected statistical
    # tail exceeds 3 standard errors and nothing approaches 5.
    system = decompose_chain(SpinChainParams(10), 3)
    spec = OperatorEnsembleSpec(dim_a=8, count=20, seed=0)
    params = BinningParams()
    e = system.spectrum_t.eigenvalues
    width = params.resolve_width(system.spectrum_t.spectral_range)
    ebar = 0.5 * np.add.outer(e, e)
    a_idx, b_idx = np.nonzero(np.triu(np.abs(ebar) <= 0.5, k=1))
    bins = ((e[b_idx] - e[a_idx]) / (2.0 * width)).astype(np.int64)
    nb = int(bins.max()) + 1
    ssum = np.zeros(nb)
    ssq = np.zeros(nb)
    cnt = np.zeros(nb)
    for k in range(spec.count):
        el = matrix_elements_total_basis(system, sample_local_operator(spec, k))
        v = el[a_idx, b_idx]
        ssum += np.bincount(bins, weights=v, minlength=nb)
        ssq += np.bincount(bins, weights=v * v, minlength=nb)
        cnt += np.bincount(bins, minlength=nb)
    m = cnt >= 100
    mean = ssum[m] / cnt[m]
    var = np.maximum(ssq[m] / cnt[m] - mean**2, 0.0)
    se = np.sqrt(var / (cnt[m] - 1.0))
    z = np.abs(mean) / se
    assert z.max() < 5.0
    assert np.mean(z < 3.0) > 0.97


def test_run_ensemble_empty_window():
    system = decompose_chain(SpinChainParams(6), 2)
    spec = OperatorEnsembleSpec(dim_a=4, count=2, seed=0)
    with pytest.raises(EmptyWindowError):
        run_ensemble(system, spec, [100.0], BinningParams())


def test_kernel_backends_are_bitwise_equal():
    rng = np.random.default_rng(17)
    block = rng.standard_normal((30, 40))
    rows = rng.integers(0, 30, 500).astype(np.int32)
    cols = rng.integers(0, 40, 500).astype(np.int32)
    bins = np.sort(rng.integers(0, 25, 500))
    s_np, q_np = accumulate_pairs_numpy(block, rows, cols, bins, 25)
    s_nb, q_nb = accumulate_pairs_numba(block, rows, cols, bins, 25)
    assert np.array_equal(s_np, s_nb)
    assert np.array_equal(q_np, q_nb)

    values = rng.standard_normal((200, 16))
    gbins = np.sort(rng.integers(0, 50, 200))
    s_np, q_np = accumulate_grouped_numpy(values, gbins, 50)
    s_nb, q_nb = accumulate_grouped_numba(values, gbins, 50)
    assert np.array_equal(s_np, s_nb)
    assert np.array_equal(q_np, q_nb)

    vals = np.sort(rng.standard_normal(300))
    lows = rng.uniform(-2.0, 1.0, 40)
    highs = lows + rng.uniform(-0.5, 2.0, 40)
    assert np.array_equal(
        window_counts_numpy(vals, lows, highs),
        window_counts_numba(vals, lows, highs),
    )


def test_subsystem_gap_omegas_oracle():
    gaps = subsystem_gap_omegas(np.array([0.0, 1.0, 3.0]))
    assert np.allclose(gaps, [0.5, 1.0, 1.5])
    # Degenerate differences are deduplicated.
    gaps = subsystem_gap_omegas(np.array([0.0, 1.0, 2.0]))
    assert np.allclose(gaps, [0.5, 1.0])


def _synthetic_binned(omega, mean_sq, std_err):
    omega = np.asarray(omega, dtype=float)
    return BinnedStatistics(
        ebar_center=0.0,
        ebar_halfwidth=0.5,
        omega_bin_width=float(omega[1] - omega[0]),
        omega_mid=omega,
        mean_sq=np.asarray(mean_sq, dtype=float),
        count=np.full(omega.size, 1000),
        std_err=np.asarray(std_err, dtype=float),
    )


def test_detect_bands_monotone_curve_has_no_peaks():
    omega = np.linspace(0.05, 3.0, 60)
    binned = _synthetic_binned(
        omega, np.exp(-omega), np.full(omega.size, 1e-4)
    )
    report = detect_bands(binned, np.array([1.0, 2.0]), 0.1)
    assert report.peak_omegas.size == 0
    assert report.matched_fraction == 0.0
    assert not report.gap_matched.any()


def test_detect_bands_injected_bump():
    omega = np.linspace(0.05, 3.0, 60)
    base = np.exp(-omega)
    bump = 0.5 * np.exp(-((omega - 1.5) ** 2) / (2 * 0.05**2))
    binned = _synthetic_binned(omega, base + bump, np.full(omega.size, 1e-4))
    # Bump at a gap: one matched peak, that gap covered.
    report = detect_bands(binned, np.array([1.5, 2.5]), 0.1)
    assert report.peak_omegas.size == 1
    assert abs(report.peak_omegas[0] - 1.5) < 0.05
    assert report.matched.all()
    assert report.matched_fraction == 1.0
    assert report.gap_coverage == 0.5
    # Bump far from every gap: detected but unmatched.
    report = detect_bands(binned, np.array([0.4, 2.5]), 0.05)
    assert report.peak_omegas.size == 1
    assert not report.matched.any()
    assert report.matched_fraction == 0.0


def test_detect_bands_ignores_noise_beyond_gap_range():
    # Structure far beyond the largest gap is out of reach of an A-side
    # operator and must not produce peaks.
    omega = np.linspace(0.05, 10.0, 200)
    base = np.exp(-0.3 * omega)
    bump = 0.5 * np.exp(-((omega - 8.0) ** 2) / (2 * 0.05**2))
    binned = _synthetic_binned(omega, base + bump, np.full(omega.size, 1e-4))
    report = detect_bands(binned, np.array([1.0]), 0.1)
    assert report.peak_omegas.size == 0


def test_detect_bands_insufficient_data():
    omega = np.array([0.1, 0.2])
    binned = _synthetic_binned(omega, [1.0, 0.5], [0.01, 0.01])
    with pytest.raises(InsufficientDataError):
        detect_bands(binned, np.array([0.15]), 0.01)
    # A gap list that truncates the domain below three bins fails the same way.
    omega = np.linspace(0.05, 3.0, 60)
    binned = _synthetic_binned(omega, np.exp(-omega), np.full(60, 1e-4))
    with pytest.raises(InsufficientDataError):
        detect_bands(binned, np.array([0.01]), 0.001)


def test_quantile_states_spread():
    states = quantile_states(4096)
    assert states.shape == (7,)
    assert states[0] > 0 and states[-1] < 4095
    assert np.all(np.diff(states) > 0)
    assert np.array_equal(quantile_states(9, count=3), [2, 4, 6])
