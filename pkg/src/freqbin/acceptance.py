"""Acceptance checks at the reference operating point.

Each check returns a :class:`CriterionResult`; ``freqbin verify`` and the
test suite both run :func:`run_all`.  Tolerances are fixed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .beating import BeatingParams, delay_grid, synthesize_beating_dataset
from .cli_io.config import paper_profile
from .counting import (
    BRANCHES,
    BranchCounts,
    SourceModel,
    accidental_rate,
    antibunch_bunch_ratio_db,
    balance_parameter,
    car,
    car_point,
    simulate_branch_counts,
    simulate_power_scan,
)
from .estimation import (
    BeatingFit,
    fidelity_closed_form,
    fidelity_to_bell,
    fit_beating,
    fit_power_scan,
    physicality_margin,
    propagate_uncertainties,
    reconstruct_density,
)
from .estimation.fitting import PARAM_NAMES
from .statekit import (
    BranchProbabilities,
    PhotonFrequencies,
    branch_probabilities,
    fpbs_decompose,
    frequency_difference,
    sagnac_state,
    solve_signal_wavelength,
)

REF_COUNTS = BranchCounts.poissonian(155, 157, 22427, 28560, integration_time=10.0)
REF_P, REF_V, REF_PHI = 0.56, 0.96, 0.0
REF_SIGMA_V, REF_SIGMA_PHI = 0.061, 0.01
LAMBDA_PUMP, LAMBDA_IDLER = 1540.56, 1531.90


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:2d} {self.name}: {self.detail}"


def _reference_fit() -> BeatingFit:
    params = BeatingParams(1000.0, REF_V, 0.6, 13.8, REF_PHI)
    unc = dict.fromkeys(PARAM_NAMES, 0.0)
    unc["visibility_V"] = REF_SIGMA_V
    unc["phase_phi"] = REF_SIGMA_PHI
    return BeatingFit(params, unc, 1.0, True, 0)


def check_fidelity() -> CriterionResult:
    rho = reconstruct_density(REF_P, REF_V, REF_PHI)
    f_mat = fidelity_to_bell(rho)
    f_cf = fidelity_closed_form(REF_V, REF_PHI)
    ok = abs(f_mat - 0.98) <= 1e-4 and abs(f_cf - 0.98) <= 1e-4
    return CriterionResult(1, "fidelity closed form", ok, f"contraction {f_mat:.6f}, closed form {f_cf:.6f}, target 0.9800 +/- 1e-4")


def check_ratio_db() -> CriterionResult:
    r = antibunch_bunch_ratio_db(REF_COUNTS)
    return CriterionResult(2, "antibunching/bunching ratio", abs(r - 22.13) <= 0.01, f"{r:.4f} dB, target 22.13 +/- 0.01 dB")


def check_balance(replicates: int = 2000) -> CriterionResult:
    p, _ = balance_parameter(REF_COUNTS)
    boot = propagate_uncertainties(REF_COUNTS, _reference_fit(), replicates=replicates, seed=1)
    sp = boot.std("p")
    ok = abs(p - 0.560) <= 0.001 and sp <= 0.01
    return CriterionResult(3, "balance parameter", ok, f"p = {p:.5f} (target 0.560 +/- 0.001), bootstrap sigma_p = {sp:.5f} (<= 0.01)")


def check_physicality(n: int = 50) -> CriterionResult:
    m = physicality_margin(REF_P, REF_V)
    disagreements = 0
    for p in np.linspace(0.0, 1.0, n):
        for V in np.linspace(0.0, 1.0, n):
            rho = reconstruct_density(float(p), float(V), 0.0)
            eig_ok = rho.eigenvalues().min() >= -1e-12
            margin_ok = physicality_margin(float(p), float(V)) >= -1e-12
            disagreements += eig_ok != margin_ok
    ok = abs(m - 0.01639) <= 1e-5 and disagreements == 0
    return CriterionResult(4, "physicality margin", ok, f"margin {m:.6f} (target 0.01639 +/- 1e-5), eigenvalue/margin disagreements on {n}x{n} grid: {disagreements}")


def check_car() -> CriterionResult:
    c = car(75360.0, 51.02)
    singles = math.sqrt(51.02 / 300e-12)
    acc = accidental_rate(singles, singles, 300.0)
    rel = abs(acc - 51.02) / 51.02
    cfg = paper_profile()
    point = car_point(cfg.source_model(), cfg["pump.power_mw"], cfg.coincidence())
    acc_profile = accidental_rate(point.singles_signal, point.singles_idler, cfg["coincidence.window_ps"])
    rel_profile = abs(acc_profile - point.accidental) / point.accidental
    ok = abs(c - 1477) <= 1 and rel <= 1e-9 and rel_profile <= 1e-9 and abs(point.car - 1477) <= 1
    return CriterionResult(
        5,
        "CAR operating point",
        ok,
        f"CAR {c:.2f} (1477 +/- 1); accidentals rel. err {rel:.1e}; profile point {point.coincidence / 1e3:.2f} kHz at CAR {point.car:.1f}",
    )


def check_beating_round_trip(replicates: int = 100) -> CriterionResult:
    params = BeatingParams(1000.0, REF_V, 0.6, 13.8, 0.0)
    delays = delay_grid(10.0, 0.02)
    hits = 0
    sigmas = []
    for seed in range(replicates):
        data = synthesize_beating_dataset(params, delays, seed)
        fit = fit_beating(data)
        s = fit.uncertainties["visibility_V"]
        sigmas.append(s)
        hits += fit.converged and abs(fit.params.visibility_V - REF_V) <= 3 * s
    mean_sigma = float(np.mean(sigmas))
    ok = hits >= 95 and mean_sigma <= 0.061
    return CriterionResult(6, "beating round trip", ok, f"{hits}/{replicates} within 3 sigma (>= 95), mean sigma_V {mean_sigma:.4f} (<= 0.061)")


def check_branch_law(n: int = 1000) -> CriterionResult:
    rng = np.random.default_rng(7)
    worst = 0.0
    for phi0 in rng.uniform(-2 * np.pi, 2 * np.pi, n):
        bp = branch_probabilities(fpbs_decompose(sagnac_state(phi0)))
        worst = max(
            worst,
            abs(bp.antibunching - math.sin(phi0 / 2) ** 2),
            abs(bp.bunching - math.cos(phi0 / 2) ** 2),
        )
    pure_ab = branch_probabilities(fpbs_decompose(sagnac_state(math.pi)))
    pure_b = branch_probabilities(fpbs_decompose(sagnac_state(0.0)))
    ends = (
        abs(pure_ab.antibunching - 1) <= 1e-12
        and abs(pure_b.bunching - 1) <= 1e-12
    )
    ok = worst <= 1e-12 and ends
    return CriterionResult(7, "branch-probability law", ok, f"max deviation {worst:.1e} over {n} phases (<= 1e-12); pure states at 0 and pi: {ends}")


def check_poisson(replicates: int = 10000) -> CriterionResult:
    probs = BranchProbabilities(0.1, 0.15, 0.35, 0.4)
    total = 2000.0
    eff = (1.0, 1.0, 1.0, 1.0)
    draws = np.array(
        [list(simulate_branch_counts(probs, total, eff, seed=s).counts().values()) for s in range(replicates)],
        dtype=float,
    )
    means = np.array(probs.as_tuple()) * total
    ratios = []
    ok = True
    for j, b in enumerate(BRANCHES):
        m, v = draws[:, j].mean(), draws[:, j].var(ddof=1)
        se = math.sqrt(means[j] / replicates)
        ratio = v / m
        ratios.append(ratio)
        ok &= abs(m - means[j]) <= 3 * se and 0.9 <= ratio <= 1.1
    return CriterionResult(8, "Poisson statistics", ok, "var/mean " + ", ".join(f"{b} {r:.3f}" for b, r in zip(BRANCHES, ratios)) + " (in [0.9, 1.1])")


def check_power_scan(seeds: int = 10) -> CriterionResult:
    model = SourceModel(188.27245, 357.465, 0.2, 0.2, 100.0)
    truth = np.array([model.pair_coefficient * model.collection_efficiency_idler, model.noise_coefficient, model.dark_rate])
    powers = np.linspace(10.0, 100.0, 10)
    worst = 0.0
    exact = True
    for seed in range(seeds):
        pts = simulate_power_scan(model, powers, 1.0, seed)
        fit = fit_power_scan(pts)
        worst = max(worst, float(np.max(np.abs(fit.coefficients() - truth) / fit.sigmas())))
        for P in powers:
            pair, noise, const = fit.decompose(P)
            exact &= (pair + noise + const) == fit.evaluate(P)
    ok = worst <= 3.0 and bool(exact)
    return CriterionResult(9, "power-scan round trip", ok, f"worst pull {worst:.2f} sigma over {seeds} scans (<= 3), decomposition exact: {bool(exact)}")


def check_energy() -> CriterionResult:
    ls = solve_signal_wavelength(LAMBDA_PUMP, LAMBDA_IDLER)
    freqs = PhotonFrequencies(LAMBDA_PUMP, ls, LAMBDA_IDLER)
    lhs = 2 / LAMBDA_PUMP
    rel = abs(lhs - (1 / ls + 1 / LAMBDA_IDLER)) / lhs
    dw = frequency_difference(freqs)
    ok = abs(ls - 1549.32) <= 0.01 and rel <= 1e-9 and abs(dw - 13.8) <= 0.01 * 13.8
    return CriterionResult(10, "energy conservation", ok, f"signal {ls:.3f} nm (1549.32), closure rel. err {rel:.1e}, delta_omega {dw:.3f} rad/ps (13.8 +/- 1%)")


CRITERIA = (
    check_fidelity,
    check_ratio_db,
    check_balance,
    check_physicality,
    check_car,
    check_beating_round_trip,
    check_branch_law,
    check_poisson,
    check_power_scan,
    check_energy,
)


def run_all() -> list[CriterionResult]:
    return [check() for check in CRITERIA]

