"""Inverse problems: curve fits, density-matrix reconstruction, bootstrap."""

from .bootstrap import BootstrapResult, propagate_uncertainties
from .fitting import (
    PARAM_NAMES,
    BeatingFit,
    PolynomialFit,
    fit_beating,
    fit_power_scan,
    initial_guess,
)
from .tomography import (
    DensityMatrix,
    fidelity_closed_form,
    fidelity_to_bell,
    physicality_margin,
    reconstruct_density,
)

__all__ = [
    "PARAM_NAMES",
    "BeatingFit",
    "BootstrapResult",
    "DensityMatrix",
    "PolynomialFit",
    "fidelity_closed_form",
    "fidelity_to_bell",
    "fit_beating",
    "fit_power_scan",
    "initial_guess",
    "physicality_margin",
    "propagate_uncertainties",
    "reconstruct_density",
]
