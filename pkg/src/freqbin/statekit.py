"""Two-photon state algebra from pump polarization to the fiber PBS outputs.

The Sagnac loop emits pairs in a superposition of an H (counter-clockwise)
and a V (clockwise) amplitude with relative phase ``phi0 = 2 * phi_p``,
where ``phi_p`` is the relative phase of the pump's V and H components.
A polarization beam splitter then maps that superposition onto spatially
bunched (both photons in the same output port) and antibunched (one photon
per port) path states.

Conventions
-----------
* ``phi0`` sits on the second (V/CW) amplitude; the first amplitude is real
  positive.
* Angles are radians and are not wrapped except by :func:`pump_phase`.
* Wavelengths are vacuum wavelengths in nm; angular frequencies in rad/ps.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

from .errors import BasisMismatchError, InfeasibleWavelengthError, ValidationError

#: Speed of light in nm/ps.
SPEED_OF_LIGHT_NM_PER_PS = 299792.458

NORM_TOL = 1e-12
ENERGY_TOL = 1e-9

_SQRT1_2 = 1.0 / math.sqrt(2.0)


class Basis(str, enum.Enum):
    HV = "HV"
    BUNCH_ANTIBUNCH = "BunchAntibunch"
    PATH_BRANCHES = "PathBranches"


def _check_normalized(a: complex, b: complex, what: str) -> None:
    norm = abs(a) ** 2 + abs(b) ** 2
    if not math.isfinite(norm) or abs(norm - 1.0) > NORM_TOL:
        raise ValidationError(f"{what} is not normalized (|a|^2 + |b|^2 = {norm!r})")


@dataclass(frozen=True)
class PumpPolarization:
    """Jones vector of the pump in the loop PBS axes."""

    amplitude_h: complex
    amplitude_v: complex

    def __post_init__(self):
        _check_normalized(self.amplitude_h, self.amplitude_v, "pump polarization")

    @classmethod
    def from_phase(cls, phi_p: float, theta: float = math.pi / 4) -> "PumpPolarization":
        """Elliptical pump with H/V split angle ``theta`` and relative phase ``phi_p``."""
        return cls(complex(math.cos(theta)), math.sin(theta) * cmath.exp(1j * phi_p))


@dataclass(frozen=True)
class TwoPhotonState:
    """Two complex amplitudes labelled by the basis they refer to.

    In the ``HV`` basis the amplitudes weight the H-generated and V-generated
    pair; in ``BunchAntibunch`` they weight the bunched and antibunched path
    states.
    """

    amp_first: complex
    amp_second: complex
    basis_label: Basis = Basis.HV

    def __post_init__(self):
        object.__setattr__(self, "basis_label", Basis(self.basis_label))
        if self.basis_label in (Basis.HV, Basis.BUNCH_ANTIBUNCH):
            _check_normalized(self.amp_first, self.amp_second, "two-photon state")

    def with_global_phase(self, theta: float) -> "TwoPhotonState":
        g = cmath.exp(1j * theta)
        return TwoPhotonState(g * self.amp_first, g * self.amp_second, self.basis_label)


@dataclass(frozen=True)
class BranchProbabilities:
    """Coincidence outcome probabilities at the PBS output ports.

    ``p_ab`` is the probability of the signal photon leaving port a and the
    idler leaving port b; the other fields follow the same pattern.
    """

    p_aa: float
    p_bb: float
    p_ab: float
    p_ba: float

    def __post_init__(self):
        vals = self.as_tuple()
        if any(not (0.0 <= v <= 1.0) for v in vals):
            raise ValidationError(f"branch probabilities outside [0, 1]: {vals}")
        if abs(sum(vals) - 1.0) > NORM_TOL:
            raise ValidationError(f"branch probabilities sum to {sum(vals)!r}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p_aa, self.p_bb, self.p_ab, self.p_ba)

    @property
    def bunching(self) -> float:
        return self.p_aa + self.p_bb

    @property
    def antibunching(self) -> float:
        return self.p_ab + self.p_ba


@dataclass(frozen=True)
class PhotonFrequencies:
    """Pump, signal and idler vacuum wavelengths in nm.

    Construction enforces energy conservation of the cascaded process
    (two pump photons make one SPDC pump photon).
    """

    lambda_pump: float
    lambda_signal: float
    lambda_idler: float

    def __post_init__(self):
        for name in ("lambda_pump", "lambda_signal", "lambda_idler"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be positive and finite, got {v!r}")
        lhs = 2.0 / self.lambda_pump
        rhs = 1.0 / self.lambda_signal + 1.0 / self.lambda_idler
        if abs(lhs - rhs) > ENERGY_TOL * lhs:
            raise ValidationError(
                f"energy not conserved: 2/lp = {lhs!r}, 1/ls + 1/li = {rhs!r}"
            )

    @classmethod
    def from_pump_and_idler(cls, lambda_pump: float, lambda_idler: float) -> "PhotonFrequencies":
        return cls(lambda_pump, solve_signal_wavelength(lambda_pump, lambda_idler), lambda_idler)


def pump_phase(pol: PumpPolarization) -> float:
    """Relative phase of the V and H pump components, wrapped to (-pi, pi]."""
    _check_normalized(pol.amplitude_h, pol.amplitude_v, "pump polarization")
    if pol.amplitude_h == 0 or pol.amplitude_v == 0:
        raise ValidationError("relative phase undefined for a linearly H or V pump")
    return cmath.phase(pol.amplitude_v * pol.amplitude_h.conjugate())


def loop_phase(phi_p: float) -> float:
    """Relative phase of the two loop directions, twice the pump phase."""
    return 2.0 * phi_p


def sagnac_state(phi0: float) -> TwoPhotonState:
    """Pair state leaving the loop PBS: ``(1, exp(i phi0)) / sqrt(2)``."""
    if not math.isfinite(phi0):
        raise ValidationError(f"phi0 must be finite, got {phi0!r}")
    return TwoPhotonState(complex(_SQRT1_2), _SQRT1_2 * cmath.exp(1j * phi0), Basis.HV)


def fpbs_decompose(state: TwoPhotonState) -> TwoPhotonState:
    """Re-express an HV state in the bunching/antibunching path basis.

    For ``sagnac_state(phi0)`` this gives ``((1 + e^{i phi0}) / 2,
    (1 - e^{i phi0}) / 2)``.
    """
    if state.basis_label is not Basis.HV:
        raise BasisMismatchError(
            f"fpbs_decompose expects an HV state, got {state.basis_label.value}"
        )
    h, v = state.amp_first, state.amp_second
    return TwoPhotonState((h + v) * _SQRT1_2, (h - v) * _SQRT1_2, Basis.BUNCH_ANTIBUNCH)


def branch_probabilities(state: TwoPhotonState) -> BranchProbabilities:
    """Split bunched and antibunched weights evenly over their two port pairs."""
    if state.basis_label is not Basis.BUNCH_ANTIBUNCH:
        raise BasisMismatchError(
            f"branch_probabilities expects a BunchAntibunch state, got {state.basis_label.value}"
        )
    pb = abs(state.amp_first) ** 2
    pab = abs(state.amp_second) ** 2
    # absorb the last-ulp rounding so the four values sum to one
    total = pb + pab
    pb, pab = pb / total, pab / total
    return BranchProbabilities(pb / 2, pb / 2, pab / 2, pab / 2)


def branch_probabilities_from_pump(phi_p: float) -> BranchProbabilities:
    return branch_probabilities(fpbs_decompose(sagnac_state(loop_phase(phi_p))))


def solve_signal_wavelength(lambda_pump: float, lambda_idler: float) -> float:
    """Signal wavelength (nm) fixed by energy conservation ``2/lp = 1/ls + 1/li``."""
    if not (lambda_pump > 0 and lambda_idler > 0):
        raise ValidationError("wavelengths must be positive")
    inv = 2.0 / lambda_pump - 1.0 / lambda_idler
    if not inv > 0:
        raise InfeasibleWavelengthError(
            f"no positive signal wavelength for pump {lambda_pump} nm, idler {lambda_idler} nm"
        )
    return 1.0 / inv


def frequency_difference(freqs: PhotonFrequencies) -> float:
    """Idler minus signal angular frequency in rad/ps."""
    c = SPEED_OF_LIGHT_NM_PER_PS
    return 2.0 * math.pi * c * (1.0 / freqs.lambda_idler - 1.0 / freqs.lambda_signal)


def frequencies_from_difference(lambda_pump: float, delta_omega: float) -> PhotonFrequencies:
    """Inverse of :func:`frequency_difference` for a given pump wavelength."""
    half_sum = 1.0 / lambda_pump
    half_diff = delta_omega / (4.0 * math.pi * SPEED_OF_LIGHT_NM_PER_PS)
    inv_signal = half_sum - half_diff
    inv_idler = half_sum + half_diff
    if not (inv_signal > 0 and inv_idler > 0):
        raise InfeasibleWavelengthError(
            f"delta_omega {delta_omega} rad/ps too large for pump {lambda_pump} nm"
        )
    return PhotonFrequencies(lambda_pump, 1.0 / inv_signal, 1.0 / inv_idler)
