"""Curve fits: the beating interferogram and the singles power scan."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import nnls

from ..beating import BeatingDataset, BeatingParams, beating_curve
from ..errors import DegenerateFitError, ValidationError
from .lm import levenberg_marquardt

PARAM_NAMES = ("amplitude_A", "visibility_V", "envelope_Omega", "delta_omega", "phase_phi")

MIN_GUESS_POINTS = 16
START_PHASES = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)

# relative chi2 difference under which two starts count as tied
_TIE_RTOL = 1e-9
# reciprocal condition number below which normal equations count as singular
_RCOND = 1e-14


@dataclass(frozen=True)
class BeatingFit:
    params: BeatingParams
    uncertainties: dict[str, float]
    reduced_chi_square: float
    converged: bool
    iterations: int
    n_points: int = 0
    accidentals_subtracted: float = 0.0

    def __post_init__(self):
        if self.converged:
            for name, s in self.uncertainties.items():
                if not (math.isfinite(s) and s >= 0):
                    raise ValidationError(f"converged fit has invalid uncertainty for {name}: {s!r}")

    def sigma(self, name: str) -> float:
        return self.uncertainties[name]


def _wrap(phi: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.remainder(phi, 2 * math.pi)
    return math.pi if w == -math.pi else w


def _canonical(x: np.ndarray) -> np.ndarray:
    """Map a parameter vector onto the canonical branch of its symmetries.

    The curve is unchanged under Omega -> -Omega, (V, phi) -> (-V, phi + pi)
    and (delta_omega, phi) -> (-delta_omega, -phi); pick Omega, V and
    delta_omega nonnegative and phi in (-pi, pi].
    """
    A, V, Om, dw, phi = (float(v) for v in x)
    Om = abs(Om)
    if V < 0:
        V, phi = -V, phi + math.pi
    if dw < 0:
        dw, phi = -dw, -phi
    return np.array([A, V, Om, dw, _wrap(phi)])


def _model_and_jacobian(x, tau):
    A, V, Om, dw, phi = x
    u = Om * tau
    s = np.sinc(u / np.pi)
    small = np.abs(u) < 1e-4
    safe_u = np.where(small, 1.0, u)
    ds = np.where(small, -u / 3.0, (safe_u * np.cos(safe_u) - np.sin(safe_u)) / safe_u**2)
    arg = dw * tau + phi
    c, sn = np.cos(arg), np.sin(arg)
    f = A * (1.0 - V * s * c)
    J = np.empty((tau.size, 5))
    J[:, 0] = 1.0 - V * s * c
    J[:, 1] = -A * s * c
    J[:, 2] = -A * V * c * ds * tau
    J[:, 3] = A * V * s * sn * tau
    J[:, 4] = A * V * s * sn
    return f, J


def _effective_sigma(data: BeatingDataset) -> np.ndarray:
    # empty bins would get infinite weight with sigma = sqrt(0)
    return np.maximum(data.sigmas, 1.0)


def initial_guess(data: BeatingDataset) -> BeatingParams:
    """Starting point for :func:`fit_beating` read off the data."""
    n = len(data)
    if n < MIN_GUESS_POINTS:
        raise ValidationError(f"initial_guess needs at least {MIN_GUESS_POINTS} points, got {n}")
    counts = data.counts.astype(float)
    A = float(counts.mean())

    span = float(data.delays[-1] - data.delays[0])
    grid = np.linspace(data.delays[0], data.delays[-1], n)
    dt = grid[1] - grid[0]
    y = np.interp(grid, data.delays, counts)
    spec = np.abs(np.fft.rfft(y - y.mean()))
    k = 1 + int(np.argmax(spec[1:]))
    kf = float(k)
    if 1 <= k < len(spec) - 1:
        # parabolic refinement of the peak, stays within one bin
        a, b, c = spec[k - 1], spec[k], spec[k + 1]
        denom = a - 2 * b + c
        if denom != 0:
            kf += float(np.clip(0.5 * (a - c) / denom, -0.5, 0.5))
    dw = float(2 * math.pi * kf / (n * dt))

    hi, lo = counts.max(), counts.min()
    V = float(np.clip((hi - lo) / (hi + lo), 0.0, 1.0)) if hi + lo > 0 else 0.0
    return BeatingParams(A if A > 0 else 1.0, V, 2 * math.pi / span, dw, 0.0)


def _fit_once(x0, tau, y, sigma, max_iter):
    def residuals(x):
        f, _ = _model_and_jacobian(x, tau)
        return (y - f) / sigma

    def jacobian(x):
        _, J = _model_and_jacobian(x, tau)
        return -J / sigma[:, None]

    return levenberg_marquardt(residuals, jacobian, x0, max_iter=max_iter)


def fit_beating(
    data: BeatingDataset,
    guess: BeatingParams | None = None,
    *,
    accidentals_per_point: float = 0.0,
    subtract_accidentals: bool = False,
    max_iter: int = 1000,
) -> BeatingFit:
    """Weighted least-squares fit of the beating curve.

    Weights are ``1/sigma**2`` from the dataset's Poisson errors.  The fit
    is started from ``guess`` (or :func:`initial_guess`) with the phase set
    to each of 0, pi/2, pi, 3pi/2 and with both signs of ``delta_omega``;
    the lowest chi-square wins, ties going to the smaller ``|phi|``.

    With ``subtract_accidentals`` a constant ``accidentals_per_point`` is
    removed from the counts first.  Uncertainties are the square roots of
    the diagonal of ``inv(J^T W J)`` scaled by the reduced chi-square.

    Raises
    ------
    DegenerateFitError
        If the normal-equations matrix at the optimum is singular.
    """
    n = len(data)
    if n <= len(PARAM_NAMES):
        raise ValidationError(f"need more than {len(PARAM_NAMES)} points to fit, got {n}")
    if guess is None:
        guess = initial_guess(data)
    tau = data.delays
    sigma = _effective_sigma(data)
    y = data.counts.astype(float)
    acc = float(accidentals_per_point) if subtract_accidentals else 0.0
    y = y - acc

    base = guess.as_array()
    best = None
    for sign in (1.0, -1.0):
        for phi0 in START_PHASES:
            x0 = base.copy()
            x0[3] = sign * abs(base[3])
            x0[4] = phi0
            res = _fit_once(x0, tau, y, sigma, max_iter)
            x = _canonical(res.x)
            key = (res.chi2, abs(x[4]))
            if best is None or _better(key, best[0]):
                best = (key, x, res)
    (_, _), x, res = best

    _, J = _model_and_jacobian(x, tau)
    Jw = J / sigma[:, None]
    normal = Jw.T @ Jw
    d = np.sqrt(np.diag(normal))
    if not np.all(np.isfinite(normal)) or np.any(d == 0):
        raise DegenerateFitError("normal equations are singular at the optimum")
    scaled = normal / np.outer(d, d)
    if 1.0 / np.linalg.cond(scaled) < _RCOND:
        raise DegenerateFitError("normal equations are ill-conditioned at the optimum")
    cov = np.linalg.inv(scaled) / np.outer(d, d)
    dof = n - len(PARAM_NAMES)
    red = res.chi2 / dof
    errs = np.sqrt(np.clip(np.diag(cov), 0.0, None) * red)
    return BeatingFit(
        params=BeatingParams.from_array(x),
        uncertainties=dict(zip(PARAM_NAMES, (float(e) for e in errs))),
        reduced_chi_square=float(red),
        converged=bool(res.converged),
        iterations=int(res.iterations),
        n_points=n,
        accidentals_subtracted=acc,
    )


def _better(key, other):
    chi_a, phi_a = key
    chi_b, phi_b = other
    if abs(chi_a - chi_b) <= _TIE_RTOL * max(abs(chi_a), abs(chi_b)):
        return phi_a < phi_b
    return chi_a < chi_b


def fitted_curve(fit: BeatingFit, delays):
    return beating_curve(fit.params, delays)


@dataclass(frozen=True)
class PolynomialFit:
    """Quadratic singles law ``a P^2 + b P + c`` with standard errors.

    ``a`` carries the pair photons, ``b`` the noise photons and ``c`` the
    dark counts.
    """

    quadratic_coeff: float
    linear_coeff: float
    constant: float
    sigma_quadratic: float
    sigma_linear: float
    sigma_constant: float
    chi_square: float = 0.0
    constrained: bool = False
    covariance: np.ndarray = field(default=None, compare=False, repr=False)

    def decompose(self, power):
        """Pair, noise and constant contributions at ``power`` (mW)."""
        p = np.asarray(power, dtype=float)
        return self.quadratic_coeff * p**2, self.linear_coeff * p, self.constant + 0.0 * p

    def evaluate(self, power):
        pair, noise, const = self.decompose(power)
        return pair + noise + const

    def coefficients(self) -> np.ndarray:
        return np.array([self.quadratic_coeff, self.linear_coeff, self.constant])

    def sigmas(self) -> np.ndarray:
        return np.array([self.sigma_quadratic, self.sigma_linear, self.sigma_constant])


def fit_power_scan(points: Sequence[tuple[float, float, float]]) -> PolynomialFit:
    """Weighted quadratic fit of singles rate against pump power.

    ``points`` holds ``(power_mW, singles_Hz, sigma_Hz)`` rows.  Coefficients
    are constrained nonnegative: when the unconstrained solution has a
    negative coefficient the fit falls back to nonnegative least squares.
    The errors come from ``inv(X^T W X)`` with the given sigmas taken as
    absolute.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValidationError("points must be (power, singles, sigma) rows")
    if len(arr) < 4:
        raise ValidationError(f"need at least 4 points, got {len(arr)}")
    P, y, s = arr.T
    if len(np.unique(P)) != len(P):
        raise ValidationError("powers must be distinct")
    if np.any(~(s > 0)):
        raise ValidationError("sigmas must be > 0")

    X = np.column_stack([P**2, P, np.ones_like(P)])
    Xw = X / s[:, None]
    yw = y / s
    norms = np.linalg.norm(Xw, axis=0)
    if np.any(norms == 0) or np.linalg.cond(Xw / norms) > 1e10:
        raise DegenerateFitError("power-scan design matrix is ill-conditioned")

    coef, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    constrained = bool(np.any(coef < 0))
    if constrained:
        coef, _ = nnls(Xw / norms, yw)
        coef = coef / norms
    cov = np.linalg.inv(Xw.T @ Xw)
    errs = np.sqrt(np.diag(cov))
    resid = yw - Xw @ coef
    return PolynomialFit(
        *(float(c) for c in coef),
        *(float(e) for e in errs),
        chi_square=float(resid @ resid),
        constrained=constrained,
        covariance=cov,
    )
