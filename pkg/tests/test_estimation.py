import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqbin.beating import BeatingDataset, BeatingParams, beating_curve, delay_grid, synthesize_beating_dataset
from freqbin.counting import BranchCounts
from freqbin.errors import DegenerateFitError, ValidationError
from freqbin.estimation import (
    BeatingFit,
    fidelity_closed_form,
    fidelity_to_bell,
    fit_beating,
    fit_power_scan,
    physicality_margin,
    propagate_uncertainties,
    reconstruct_density,
)
from freqbin.estimation.fitting import PARAM_NAMES, initial_guess
from freqbin.estimation.lm import levenberg_marquardt
from freqbin.estimation.tomography import PSI_PLUS, project_visibility

REF_COUNTS = BranchCounts.poissonian(155, 157, 22427, 28560)


def noiseless(params, span=10.0, step=0.02):
    d = delay_grid(span, step)
    y = np.round(beating_curve(params, d))
    return BeatingDataset(d, y, np.sqrt(y))


def fixed_fit(V, phi, sV=0.0, sphi=0.0):
    unc = dict.fromkeys(PARAM_NAMES, 0.0)
    unc["visibility_V"] = sV
    unc["phase_phi"] = sphi
    return BeatingFit(BeatingParams(1000.0, V, 0.6, 13.8, phi), unc, 1.0, True, 0)


# Levenberg-Marquardt ------------------------------------------------------------

def test_lm_rosenbrock():
    def res(x):
        return np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])

    def jac(x):
        return np.array([[-20 * x[0], 10.0], [-1.0, 0.0]])

    out = levenberg_marquardt(res, jac, [-1.2, 1.0])
    assert out.converged
    assert out.x == pytest.approx([1.0, 1.0], abs=1e-6)


def test_lm_linear_matches_lstsq():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 3))
    y = rng.normal(size=30)
    out = levenberg_marquardt(lambda b: X @ b - y, lambda b: X, np.zeros(3))
    ref, *_ = np.linalg.lstsq(X, y, rcond=None)
    assert out.x == pytest.approx(ref, abs=1e-8)


# beating fit -------------------------------------------------------------------

def test_noiseless_fit_recovers_parameters():
    truth = BeatingParams(1e9, 0.96, 0.6, 13.8, 0.3)
    fit = fit_beating(noiseless(truth))
    assert fit.converged
    assert fit.params.as_array() == pytest.approx(truth.as_array(), rel=1e-6, abs=1e-6)


def test_fit_is_idempotent():
    data = synthesize_beating_dataset(BeatingParams(1000.0, 0.96, 0.6, 13.8, 0.0), delay_grid(10, 0.02), seed=4)
    first = fit_beating(data)
    second = fit_beating(data, first.params)
    assert second.params.as_array() == pytest.approx(first.params.as_array(), rel=1e-6, abs=1e-9)


def test_fit_deterministic():
    data = synthesize_beating_dataset(BeatingParams(1000.0, 0.9, 0.6, 13.8, 0.0), delay_grid(10, 0.02), seed=8)
    assert fit_beating(data) == fit_beating(data)


def test_fit_uncertainties_finite_and_chi2_near_one():
    data = synthesize_beating_dataset(BeatingParams(1000.0, 0.96, 0.6, 13.8, 0.0), delay_grid(10, 0.02), seed=2)
    fit = fit_beating(data)
    assert fit.converged
    assert all(math.isfinite(s) and s >= 0 for s in fit.uncertainties.values())
    assert 0.7 < fit.reduced_chi_square < 1.3
    assert fit.uncertainties["visibility_V"] <= 0.061


def test_fit_canonical_branch():
    truth = BeatingParams(1e9, 0.8, 0.5, 12.0, -2.0)
    fit = fit_beating(noiseless(truth))
    p = fit.params
    assert p.visibility_V >= 0 and p.envelope_Omega >= 0 and p.delta_omega >= 0
    assert -math.pi < p.phase_phi <= math.pi
    assert p.phase_phi == pytest.approx(-2.0, abs=1e-6)


def test_initial_guess_finds_beat_frequency():
    data = synthesize_beating_dataset(BeatingParams(1000.0, 0.96, 0.6, 13.8, 0.0), delay_grid(10, 0.02), seed=1)
    assert abs(initial_guess(data).delta_omega) == pytest.approx(13.8, rel=0.05)


def test_initial_guess_needs_16_points():
    d = np.arange(15, dtype=float)
    with pytest.raises(ValidationError):
        initial_guess(BeatingDataset(d, np.ones(15), np.ones(15)))


def test_subtract_accidentals_shifts_amplitude():
    truth = BeatingParams(1e9, 0.9, 0.6, 13.8, 0.0)
    data = noiseless(truth)
    shifted = BeatingDataset(data.delays, data.counts + 5e6, data.sigmas)
    fit = fit_beating(shifted, accidentals_per_point=5e6, subtract_accidentals=True)
    assert fit.accidentals_subtracted == 5e6
    assert fit.params.amplitude_A == pytest.approx(1e9, rel=1e-6)
    assert fit.params.visibility_V == pytest.approx(0.9, rel=1e-6)


def test_degenerate_flat_data():
    d = delay_grid(10, 0.1)
    with pytest.raises(DegenerateFitError):
        fit_beating(BeatingDataset(d, np.full(len(d), 100.0), np.full(len(d), 10.0)), BeatingParams(100.0, 0.0, 0.6, 13.8))


def test_converged_fit_rejects_nan_uncertainty():
    unc = dict.fromkeys(PARAM_NAMES, 0.0)
    unc["visibility_V"] = math.nan
    with pytest.raises(ValidationError):
        BeatingFit(BeatingParams(1.0, 0.5, 0.6, 13.8), unc, 1.0, True, 3)


# power scan ----------------------------------------------------------------------

def test_power_scan_equal_weights_matches_normal_equations():
    P = np.array([10.0, 20, 30, 45, 60, 80, 100])
    y = 7.0 * P**2 + 300 * P + 100 + np.array([3, -4, 1, 5, -2, 0, -3.0])
    fit = fit_power_scan(list(zip(P, y, np.ones_like(P))))
    X = np.column_stack([P**2, P, np.ones_like(P)])
    ref = np.linalg.solve(X.T @ X, X.T @ y)
    assert fit.coefficients() == pytest.approx(ref, rel=1e-9)
    assert fit.sigmas() == pytest.approx(np.sqrt(np.diag(np.linalg.inv(X.T @ X))), rel=1e-9)


def test_power_scan_exact_polynomial():
    P = np.linspace(10, 100, 10)
    y = 37.65 * P**2 + 357.46 * P + 100.0
    fit = fit_power_scan(list(zip(P, y, np.sqrt(y))))
    assert fit.coefficients() == pytest.approx([37.65, 357.46, 100.0], rel=1e-8)


def test_power_scan_decomposition_sums():
    P = np.linspace(10, 100, 10)
    fit = fit_power_scan(list(zip(P, 5 * P**2 + 2 * P + 9, np.ones(10))))
    for p in P:
        a, b, c = fit.decompose(p)
        assert a + b + c == fit.evaluate(p)


def test_power_scan_nonnegative_constraint():
    P = np.linspace(10, 100, 10)
    y = 5 * P**2 + 10 * P - 2000.0
    fit = fit_power_scan(list(zip(P, y, np.ones(10))))
    assert fit.constrained
    assert np.all(fit.coefficients() >= 0)


@pytest.mark.parametrize(
    "points",
    [
        [(1, 1, 1)] * 3,
        [(1, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1)],
        [(1, 1, 1), (2, 2, 0), (3, 3, 1), (4, 4, 1)],
    ],
)
def test_power_scan_rejects(points):
    with pytest.raises(ValidationError):
        fit_power_scan(points)


def test_power_scan_degenerate():
    P = 1.0 + np.array([0.0, 1e-6, 2e-6, 3e-6])
    with pytest.raises(DegenerateFitError):
        fit_power_scan(list(zip(P, np.ones(4), np.ones(4))))


# tomography -----------------------------------------------------------------------

@pytest.mark.parametrize(
    "p, V, phi, fidelity",
    [(0.56, 0.96, 0.0, 0.98), (0.5, 1.0, 0.0, 1.0), (0.5, 0.0, 0.0, 0.5), (0.5, 1.0, math.pi, 0.0)],
)
def test_fidelity_examples(p, V, phi, fidelity):
    rho = reconstruct_density(p, V, phi)
    assert fidelity_to_bell(rho) == pytest.approx(fidelity, abs=1e-12)
    assert fidelity_closed_form(V, phi) == pytest.approx(fidelity, abs=1e-12)


def test_reference_margin():
    assert physicality_margin(0.56, 0.96) == pytest.approx(0.01639, abs=1e-5)


def test_margin_zero_on_pure_state():
    assert physicality_margin(0.5, 1.0) == 0.0
    assert reconstruct_density(0.5, 1.0, 0.0).physical


def test_unphysical_flagged():
    rho = reconstruct_density(0.9, 0.9, 0.0)
    assert not rho.physical
    assert rho.eigenvalues().min() < 0


def test_pure_bell_state_purity():
    rho = reconstruct_density(0.5, 1.0, 0.0)
    assert rho.purity() == pytest.approx(1.0)
    assert rho.entries == pytest.approx(np.outer(PSI_PLUS, PSI_PLUS.conj()))


@pytest.mark.parametrize("p, V, phi", [(-0.1, 0.5, 0), (1.1, 0.5, 0), (0.5, -0.1, 0), (0.5, 1.02, 0), (0.5, 0.5, math.inf)])
def test_reconstruct_rejects(p, V, phi):
    with pytest.raises(ValidationError):
        reconstruct_density(p, V, phi)


def test_projection_clips_visibility():
    rho = reconstruct_density(0.5, 1.02, 0.0, project_physical=True)
    assert rho.projected and rho.V == 1.0 and rho.physical
    assert project_visibility(0.9, 0.9) == pytest.approx(0.6)


unit = st.floats(0, 1)


@given(unit, unit, st.floats(-math.pi, math.pi))
def test_density_invariants(p, V, phi):
    rho = reconstruct_density(p, V, phi)
    assert rho.is_hermitian()
    assert abs(np.trace(rho.entries) - 1) <= 1e-12
    assert rho.source_params == (p, V, phi)
    # positivity and margin agree
    eig_ok = rho.eigenvalues().min() >= -1e-12
    assert eig_ok == (physicality_margin(p, V) >= -1e-12) or abs(physicality_margin(p, V)) < 1e-9
    assert fidelity_to_bell(rho) == pytest.approx(fidelity_closed_form(V, phi), abs=1e-12)


# bootstrap --------------------------------------------------------------------------

def test_bootstrap_zero_width():
    counts = BranchCounts(155, 157, 22427, 28560, 0, 0, 0, 0)
    boot = propagate_uncertainties(counts, fixed_fit(0.96, 0.0), replicates=200, seed=1)
    for q in ("p", "V", "phi", "fidelity"):
        assert np.ptp(boot.samples[q]) == 0.0


def test_bootstrap_reference_fidelity_sigma():
    boot = propagate_uncertainties(REF_COUNTS, fixed_fit(0.96, 0.0, 0.061, 0.01), replicates=1000, seed=3)
    assert boot.std("fidelity") == pytest.approx(0.03, abs=0.015)
    assert boot.mean("fidelity") == pytest.approx(0.98, abs=0.005)


def test_bootstrap_sigma_p_scales_with_counts():
    fit = fixed_fit(0.96, 0.0)
    half = BranchCounts.poissonian(155, 157, 11213, 14280)
    double = BranchCounts.poissonian(155, 157, 22426, 28560)
    s1 = propagate_uncertainties(half, fit, replicates=2000, seed=5).std("p")
    s2 = propagate_uncertainties(double, fit, replicates=2000, seed=5).std("p")
    assert s1 / s2 == pytest.approx(math.sqrt(2), rel=0.1)


def test_bootstrap_reproducible():
    fit = fixed_fit(0.96, 0.0, 0.061, 0.01)
    a = propagate_uncertainties(REF_COUNTS, fit, replicates=100, seed=9)
    b = propagate_uncertainties(REF_COUNTS, fit, replicates=100, seed=9)
    for q in a.samples:
        assert np.array_equal(a.samples[q], b.samples[q])


def test_bootstrap_minimum_replicates():
    with pytest.raises(ValidationError):
        propagate_uncertainties(REF_COUNTS, fixed_fit(0.96, 0.0), replicates=99)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_bootstrap_p_within_unit_interval(seed):
    boot = propagate_uncertainties(BranchCounts.poissonian(0, 0, 3, 4), fixed_fit(0.5, 0.0), replicates=100, seed=seed)
    p = boot.samples["p"]
    p = p[np.isfinite(p)]
    assert np.all((0 <= p) & (p <= 1))
