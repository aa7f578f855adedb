"""Two-photon density matrix from balance, visibility and beating phase.

Basis order is ``|ss>, |si>, |is>, |ii>`` (first label: photon in path a,
second: path b; ``s``/``i`` the signal/idler frequency bin).  Only the
central block is populated:

    rho[1, 1] = p,  rho[2, 2] = 1 - p,  rho[1, 2] = V/2 e^{-i phi}
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

BASIS_LABELS = ("ss", "si", "is", "ii")
PHYSICAL_TOL = 1e-12

#: Target Bell state (|si> + |is>)/sqrt(2).
PSI_PLUS = np.array([0.0, 1.0, 1.0, 0.0], dtype=complex) / math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray
    p: float
    V: float
    phi: float
    projected: bool = False

    @classmethod
    def from_params(cls, p: float, V: float, phi: float, projected: bool = False) -> "DensityMatrix":
        """Build the matrix without range checks (for unphysical inputs)."""
        rho = np.zeros((4, 4), dtype=complex)
        rho[1, 1] = p
        rho[2, 2] = 1.0 - p
        rho[1, 2] = 0.5 * V * np.exp(-1j * phi)
        rho[2, 1] = 0.5 * V * np.exp(1j * phi)
        return cls(rho, float(p), float(V), float(phi), projected)

    @property
    def source_params(self) -> tuple[float, float, float]:
        return (self.p, self.V, self.phi)

    @property
    def margin(self) -> float:
        return physicality_margin(self.p, self.V)

    @property
    def physical(self) -> bool:
        return self.margin >= -PHYSICAL_TOL

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.entries, self.entries.conj().T, rtol=0, atol=tol))

    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))


def _check_ranges(p, V, phi, v_max=1.0):
    if not (0.0 <= p <= 1.0):
        raise ValidationError(f"balance parameter p must lie in [0, 1], got {p!r}")
    if not (0.0 <= V <= v_max):
        raise ValidationError(f"visibility V must lie in [0, 1], got {V!r}")
    if not math.isfinite(phi):
        raise ValidationError(f"phase must be finite, got {phi!r}")


def physicality_margin(p: float, V: float) -> float:
    """``sqrt(p(1-p)) - V/2``; negative means the matrix is not positive."""
    return math.sqrt(max(p * (1.0 - p), 0.0)) - V / 2.0


def project_visibility(p: float, V: float) -> float:
    """Largest physical visibility not above ``V`` for balance ``p``."""
    return min(V, 2.0 * math.sqrt(max(p * (1.0 - p), 0.0)))


def reconstruct_density(p: float, V: float, phi: float, *, project_physical: bool = False) -> DensityMatrix:
    """Density matrix for ``(p, V, phi)``.

    Out-of-range inputs raise :class:`ValidationError`.  An unphysical pair
    ``(p, V)`` is returned as-is (check :attr:`DensityMatrix.physical`)
    unless ``project_physical`` clips ``V`` to ``2 sqrt(p(1-p))``; in that
    mode a fitted ``V`` above one is accepted since the clip removes it.
    """
    _check_ranges(p, V, phi, v_max=math.inf if project_physical else 1.0)
    if project_physical and physicality_margin(p, V) < 0:
        return DensityMatrix.from_params(p, project_visibility(p, V), phi, projected=True)
    return DensityMatrix.from_params(p, V, phi)


def fidelity_to_bell(rho: DensityMatrix | np.ndarray) -> float:
    """Overlap ``<psi+|rho|psi+>`` by direct contraction."""
    m = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return float(np.real(PSI_PLUS.conj() @ m @ PSI_PLUS))


def fidelity_closed_form(V: float, phi: float) -> float:
    """Same overlap for the central-block form: ``(1 + V cos phi) / 2``."""
    return 0.5 * (1.0 + V * math.cos(phi))
