"""Photon-counting statistics for the pair source.

Rates are in Hz, pump power in mW, coincidence windows in ps.  The singles
model is the quadratic-plus-linear law used to separate pair photons
(quadratic in pump power, because of the cascaded SHG/SPDC) from noise
photons (linear) on top of a constant dark rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UndefinedCARError, ValidationError
from .statekit import BranchProbabilities

PS = 1e-12

BRANCHES = ("aa", "bb", "ab", "ba")

# Output ports of the branch-count setup: d/e see port a, f/g see port b;
# d/f carry the signal channel, e/g the idler channel.
PORTS = ("d", "e", "f", "g")
BRANCH_PORTS = {"aa": ("d", "e"), "bb": ("f", "g"), "ab": ("d", "g"), "ba": ("e", "f")}


@dataclass(frozen=True)
class SourceModel:
    pair_coefficient: float  # generated pairs, Hz/mW^2
    noise_coefficient: float  # Hz/mW
    collection_efficiency_signal: float
    collection_efficiency_idler: float
    dark_rate: float = 0.0  # Hz

    def __post_init__(self):
        for name in ("pair_coefficient", "noise_coefficient", "dark_rate"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and >= 0, got {v!r}")
        for name in ("collection_efficiency_signal", "collection_efficiency_idler"):
            v = getattr(self, name)
            if not (0 < v <= 1):
                raise ValidationError(f"{name} must lie in (0, 1], got {v!r}")

    def efficiency(self, arm: str) -> float:
        if arm == "signal":
            return self.collection_efficiency_signal
        if arm == "idler":
            return self.collection_efficiency_idler
        raise ValidationError(f"arm must be 'signal' or 'idler', got {arm!r}")

    def pair_rate(self, power: float) -> float:
        """Generated pair rate (before any loss) at ``power`` mW."""
        _check_power(power)
        return self.pair_coefficient * power**2


@dataclass(frozen=True)
class CoincidenceConfig:
    window: float  # ps
    integration_time: float  # s

    def __post_init__(self):
        if not self.window > 0:
            raise ValidationError(f"coincidence window must be > 0, got {self.window!r}")
        if not self.integration_time > 0:
            raise ValidationError(
                f"integration time must be > 0, got {self.integration_time!r}"
            )


@dataclass(frozen=True)
class BranchCounts:
    n_aa: int
    n_bb: int
    n_ab: int
    n_ba: int
    sigma_aa: float
    sigma_bb: float
    sigma_ab: float
    sigma_ba: float
    integration_time: float = 10.0

    def __post_init__(self):
        for b in BRANCHES:
            n = getattr(self, "n_" + b)
            s = getattr(self, "sigma_" + b)
            if int(n) != n or n < 0:
                raise ValidationError(f"n_{b} must be a non-negative integer, got {n!r}")
            object.__setattr__(self, "n_" + b, int(n))
            if not (math.isfinite(s) and s >= 0):
                raise ValidationError(f"sigma_{b} must be finite and >= 0, got {s!r}")
        if not self.integration_time > 0:
            raise ValidationError("integration_time must be > 0")

    @classmethod
    def poissonian(cls, n_aa, n_bb, n_ab, n_ba, integration_time=10.0) -> "BranchCounts":
        """Counts with sqrt(n) error bars."""
        ns = (n_aa, n_bb, n_ab, n_ba)
        return cls(*ns, *(math.sqrt(n) for n in ns), integration_time=integration_time)

    def counts(self) -> dict[str, int]:
        return {b: getattr(self, "n_" + b) for b in BRANCHES}

    def sigmas(self) -> dict[str, float]:
        return {b: getattr(self, "sigma_" + b) for b in BRANCHES}

    @property
    def bunching(self) -> int:
        return self.n_aa + self.n_bb

    @property
    def antibunching(self) -> int:
        return self.n_ab + self.n_ba


@dataclass(frozen=True)
class CarPoint:
    power: float
    singles_signal: float
    singles_idler: float
    coincidence: float
    accidental: float
    car: float


def _check_power(power):
    if not (math.isfinite(power) and power >= 0):
        raise ValidationError(f"pump power must be finite and >= 0, got {power!r}")


def singles_rate(model: SourceModel, power: float, arm: str = "idler") -> float:
    """Detected singles rate in one arm: pairs + noise + dark."""
    _check_power(power)
    pairs = model.pair_coefficient * power**2 * model.efficiency(arm)
    return pairs + model.noise_coefficient * power + model.dark_rate


def accidental_rate(singles_s: float, singles_i: float, window: float) -> float:
    """Uncorrelated coincidence rate for two singles rates and a window in ps."""
    if singles_s < 0 or singles_i < 0 or window < 0:
        raise ValidationError("singles rates and window must be >= 0")
    return singles_s * singles_i * (window * PS)


def car(coincidence: float, accidental: float) -> float:
    """Coincidence-to-accidental ratio, ``coincidence`` including accidentals."""
    if accidental == 0:
        raise UndefinedCARError("CAR is undefined for zero accidental rate")
    if accidental < 0 or coincidence < 0:
        raise ValidationError("rates must be >= 0")
    return coincidence / accidental


def car_point(model: SourceModel, power: float, config: CoincidenceConfig) -> CarPoint:
    """Expected singles, coincidences and CAR at one pump power."""
    s = singles_rate(model, power, "signal")
    i = singles_rate(model, power, "idler")
    true = model.pair_rate(power) * model.collection_efficiency_signal * model.collection_efficiency_idler
    acc = accidental_rate(s, i, config.window)
    measured = true + acc
    ratio = car(measured, acc) if acc > 0 else math.inf
    return CarPoint(power, s, i, measured, acc, ratio)


def simulate_power_scan(
    model: SourceModel,
    powers: Sequence[float],
    integration_time: float,
    seed: int,
    arm: str = "idler",
) -> list[tuple[float, float, float]]:
    """Poisson-sampled singles over a pump-power scan.

    Returns ``(power_mW, singles_Hz, sigma_Hz)`` rows with ``sigma`` the
    counting error sqrt(N)/T.
    """
    if not integration_time > 0:
        raise ValidationError("integration_time must be > 0")
    rng = np.random.default_rng(seed)
    rows = []
    for p in powers:
        n = int(rng.poisson(singles_rate(model, p, arm) * integration_time))
        rows.append((float(p), n / integration_time, math.sqrt(n) / integration_time))
    return rows


def branch_means(
    probs: BranchProbabilities,
    total_pairs: float,
    efficiencies: Sequence[float] | dict,
    floor: float | Sequence[float] = 0.0,
) -> dict[str, float]:
    """Expected coincidence counts per branch.

    ``efficiencies`` gives the detection probability of ports d, e, f, g (as
    a sequence in that order or a mapping); ``floor`` adds a leak count to
    every branch, or per branch when given as an (aa, bb, ab, ba) sequence.
    """
    if not total_pairs >= 0:
        raise ValidationError(f"total_pairs must be >= 0, got {total_pairs!r}")
    if not isinstance(efficiencies, dict):
        if len(efficiencies) != 4:
            raise ValidationError("need one efficiency per port (d, e, f, g)")
        efficiencies = dict(zip(PORTS, efficiencies))
    for port in PORTS:
        eta = efficiencies[port]
        if not (0 < eta <= 1):
            raise ValidationError(f"efficiency of port {port} must lie in (0, 1], got {eta!r}")
    if np.ndim(floor) == 0:
        floor = (float(floor),) * 4
    if len(floor) != 4 or any(not (f >= 0) for f in floor):
        raise ValidationError("floor must be >= 0, scalar or one per branch")
    p = dict(zip(BRANCHES, probs.as_tuple()))
    means = {}
    for b, leak in zip(BRANCHES, floor):
        u, v = BRANCH_PORTS[b]
        means[b] = p[b] * total_pairs * efficiencies[u] * efficiencies[v] + leak
    return means


def simulate_branch_counts(
    probs: BranchProbabilities,
    total_pairs: float,
    efficiencies: Sequence[float] | dict,
    floor: float | Sequence[float] = 0.0,
    seed: int = 0,
    integration_time: float = 10.0,
) -> BranchCounts:
    """Draw the four branch counts from independent Poisson distributions."""
    means = branch_means(probs, total_pairs, efficiencies, floor)
    rng = np.random.default_rng(seed)
    ns = rng.poisson([means[b] for b in BRANCHES])
    return BranchCounts.poissonian(*(int(n) for n in ns), integration_time=integration_time)


def antibunch_bunch_ratio_db(counts: BranchCounts) -> float:
    """Antibunched over bunched coincidences in dB.

    Returns ``math.inf`` when no bunched coincidences were recorded.
    """
    if counts.antibunching == 0 and counts.bunching == 0:
        raise ValidationError("no coincidences recorded")
    if counts.bunching == 0:
        return math.inf
    return 10.0 * math.log10(counts.antibunching / counts.bunching)


def balance_parameter(counts: BranchCounts) -> tuple[float, float]:
    """Share of antibunched coincidences in the ba branch, with binomial error."""
    total = counts.antibunching
    if total == 0:
        raise ValidationError("balance parameter needs antibunched coincidences")
    p = counts.n_ba / total
    return p, math.sqrt(p * (1.0 - p) / total)
