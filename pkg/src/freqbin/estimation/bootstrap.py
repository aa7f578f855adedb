"""Parametric bootstrap for the reconstructed-state figures of merit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..counting import BRANCHES, BranchCounts
from ..errors import ValidationError
from .fitting import BeatingFit
from .tomography import DensityMatrix, fidelity_to_bell

QUANTITIES = ("p", "V", "phi", "fidelity")


@dataclass(frozen=True)
class BootstrapResult:
    samples: dict[str, np.ndarray]
    replicates: int
    seed: int

    def mean(self, name: str) -> float:
        return float(np.mean(self.samples[name]))

    def std(self, name: str) -> float:
        return float(np.std(self.samples[name], ddof=1))

    def summary(self) -> dict[str, tuple[float, float]]:
        return {q: (self.mean(q), self.std(q)) for q in QUANTITIES}


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per replicate so results do not depend on scheduling."""
    return np.random.default_rng([seed, index])


def _one_replicate(counts: BranchCounts, V, sV, phi, sphi, rng):
    n = counts.counts()
    s = counts.sigmas()
    # branches quoted without error are held fixed
    drawn = {b: (rng.poisson(n[b]) if s[b] > 0 else n[b]) for b in BRANCHES}
    V_r = rng.normal(V, sV) if sV > 0 else V
    phi_r = rng.normal(phi, sphi) if sphi > 0 else phi
    total = drawn["ab"] + drawn["ba"]
    p_r = drawn["ba"] / total if total > 0 else np.nan
    # unphysical draws (V > 1, say) still enter the spread of the estimate
    rho = DensityMatrix.from_params(p_r, V_r, phi_r)
    return p_r, V_r, phi_r, fidelity_to_bell(rho)


def propagate_uncertainties(
    counts: BranchCounts,
    fit: BeatingFit,
    replicates: int = 1000,
    seed: int = 0,
) -> BootstrapResult:
    """Resample branch counts (Poisson) and fitted V, phi (Gaussian).

    Each replicate recomputes p, V, phi and the Bell-state fidelity.
    """
    if replicates < 100:
        raise ValidationError(f"need at least 100 replicates, got {replicates}")
    V = fit.params.visibility_V
    phi = fit.params.phase_phi
    sV = fit.uncertainties["visibility_V"]
    sphi = fit.uncertainties["phase_phi"]
    out = np.array(
        [_one_replicate(counts, V, sV, phi, sphi, replicate_rng(seed, k)) for k in range(replicates)]
    )
    samples = {q: out[:, j] for j, q in enumerate(QUANTITIES)}
    return BootstrapResult(samples, replicates, seed)
