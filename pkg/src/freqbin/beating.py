"""Spatial quantum beating interferogram: model curve and synthetic datasets.

The coincidence rate versus relative delay ``tau`` (ps) is

    A * (1 - V * sinc(Omega * tau) * cos(delta_omega * tau + phi))

with ``sinc(x) = sin(x) / x`` (unnormalized), ``Omega`` the filter
bandwidth and ``delta_omega`` the signal/idler angular frequency difference,
both in rad/ps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

#: Default grid: 10 ps span sampled every 0.02 ps.
DEFAULT_SPAN_PS = 10.0
DEFAULT_STEP_PS = 0.02

MIN_POINTS = 5


@dataclass(frozen=True)
class BeatingParams:
    """Parameters of the beating curve.

    Fitted parameter sets may carry ``visibility_V > 1`` (noise can push it
    there); :meth:`validate` enforces the physical range and is applied to
    anything used as a forward-model input.
    """

    amplitude_A: float
    visibility_V: float
    envelope_Omega: float
    delta_omega: float
    phase_phi: float = 0.0

    def validate(self) -> "BeatingParams":
        if not (math.isfinite(self.amplitude_A) and self.amplitude_A > 0):
            raise ValidationError(f"amplitude_A must be > 0, got {self.amplitude_A!r}")
        if not (0.0 <= self.visibility_V <= 1.0):
            raise ValidationError(f"visibility_V must lie in [0, 1], got {self.visibility_V!r}")
        if not (math.isfinite(self.envelope_Omega) and self.envelope_Omega > 0):
            raise ValidationError(f"envelope_Omega must be > 0, got {self.envelope_Omega!r}")
        if not (math.isfinite(self.delta_omega) and math.isfinite(self.phase_phi)):
            raise ValidationError("delta_omega and phase_phi must be finite")
        return self

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.amplitude_A, self.visibility_V, self.envelope_Omega, self.delta_omega, self.phase_phi]
        )

    @classmethod
    def from_array(cls, x) -> "BeatingParams":
        return cls(*(float(v) for v in x))


@dataclass(frozen=True)
class BeatingDataset:
    delays: np.ndarray  # ps
    counts: np.ndarray
    sigmas: np.ndarray
    integration_time_per_point: float = 1.0  # s

    def __post_init__(self):
        delays = np.asarray(self.delays, dtype=float)
        counts = np.asarray(self.counts)
        sigmas = np.asarray(self.sigmas, dtype=float)
        if not (delays.ndim == counts.ndim == sigmas.ndim == 1):
            raise ValidationError("delays, counts and sigmas must be 1-D")
        if not (len(delays) == len(counts) == len(sigmas)):
            raise ValidationError("delays, counts and sigmas must have equal length")
        if len(delays) < MIN_POINTS:
            raise ValidationError(f"need at least {MIN_POINTS} points, got {len(delays)}")
        if not np.all(np.diff(delays) > 0):
            raise ValidationError("delays must be strictly increasing")
        if np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise ValidationError("counts must be non-negative integers")
        if np.any(~np.isfinite(sigmas)) or np.any(sigmas < 0):
            raise ValidationError("sigmas must be finite and >= 0")
        if not self.integration_time_per_point > 0:
            raise ValidationError("integration_time_per_point must be > 0")
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "counts", counts.astype(np.int64))
        object.__setattr__(self, "sigmas", sigmas)

    def __len__(self):
        return len(self.delays)

    def __eq__(self, other):
        if not isinstance(other, BeatingDataset):
            return NotImplemented
        return (
            np.array_equal(self.delays, other.delays)
            and np.array_equal(self.counts, other.counts)
            and np.array_equal(self.sigmas, other.sigmas)
            and self.integration_time_per_point == other.integration_time_per_point
        )

    __hash__ = None


def sinc(x):
    """Unnormalized sinc, ``sin(x)/x`` with ``sinc(0) = 1``."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def beating_curve(params: BeatingParams, delay):
    """Expected coincidences at ``delay`` (ps); vectorized over ``delay``."""
    tau = np.asarray(delay, dtype=float)
    p = params
    out = p.amplitude_A * (
        1.0 - p.visibility_V * sinc(p.envelope_Omega * tau) * np.cos(p.delta_omega * tau + p.phase_phi)
    )
    return float(out) if out.ndim == 0 else out


def delay_grid(span: float, step: float) -> np.ndarray:
    """Symmetric delays around zero covering at most ``span`` ps.

    Includes 0 whenever ``span / step`` rounds to an even number of steps.
    """
    if not span > 0:
        raise ValidationError(f"span must be > 0, got {span!r}")
    if not 0 < step <= span:
        raise ValidationError(f"step must lie in (0, span], got {step!r}")
    n = math.floor(span / step + 1e-9)
    return (np.arange(n + 1) - n / 2) * step


def synthesize_beating_dataset(
    params: BeatingParams,
    delays,
    seed: int,
    integration_time_per_point: float = 1.0,
) -> BeatingDataset:
    """Poisson-sample the beating curve on ``delays``; sigma = sqrt(counts)."""
    params.validate()
    delays = np.asarray(delays, dtype=float)
    if delays.ndim != 1 or not np.all(np.diff(delays) > 0):
        raise ValidationError("delays must be a strictly increasing 1-D sequence")
    rng = np.random.default_rng(seed)
    counts = rng.poisson(beating_curve(params, delays))
    return BeatingDataset(delays, counts, np.sqrt(counts), integration_time_per_point)
