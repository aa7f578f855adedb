"""Damped least squares (Levenberg-Marquardt) for small dense problems.

Minimizes ``chi2(x) = sum(r(x)**2)`` given the residual vector ``r`` and
its Jacobian.  The damping follows Nielsen's gain-ratio update with
Marquardt's diagonal scaling, so every accepted step strictly lowers the
objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class LMResult:
    x: np.ndarray
    chi2: float
    iterations: int
    converged: bool
    jac: np.ndarray
    message: str


def levenberg_marquardt(
    residuals: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0,
    max_iter: int = 1000,
    ftol: float = 1e-10,
    xtol: float = 1e-12,
    tau: float = 1e-3,
) -> LMResult:
    """Run LM from ``x0``.

    Converges when an accepted step lowers ``chi2`` by a relative amount
    below ``ftol``, when the step norm drops below ``xtol`` (relative to the
    parameter norm), or when ``chi2`` reaches exactly zero.  After
    ``max_iter`` trial steps the best point so far is returned with
    ``converged=False``.
    """
    x = np.array(x0, dtype=float)
    r = residuals(x)
    chi2 = float(r @ r)
    J = jacobian(x)
    A = J.T @ J
    g = J.T @ r
    diag = np.maximum(np.diag(A), np.finfo(float).tiny)
    lam = tau * diag.max()
    nu = 2.0

    if chi2 == 0.0:
        return LMResult(x, chi2, 0, True, J, "zero residual")

    for it in range(1, max_iter + 1):
        scale = np.maximum(np.diag(A), diag * 1e-12)
        try:
            step = np.linalg.solve(A + lam * np.diag(scale), -g)
        except np.linalg.LinAlgError:
            lam *= nu
            nu *= 2.0
            continue
        if not np.all(np.isfinite(step)):
            lam *= nu
            nu *= 2.0
            continue
        if np.linalg.norm(step) <= xtol * (np.linalg.norm(x) + xtol):
            return LMResult(x, chi2, it, True, J, "step norm below tolerance")

        x_new = x + step
        r_new = residuals(x_new)
        chi2_new = float(r_new @ r_new)
        predicted = float(step @ (A @ step) + 2.0 * lam * step @ (scale * step))
        gain = (chi2 - chi2_new) / predicted if predicted > 0 else -1.0

        if np.isfinite(chi2_new) and chi2_new < chi2 and gain > 0:
            decrease = (chi2 - chi2_new) / chi2
            x, r, chi2 = x_new, r_new, chi2_new
            J = jacobian(x)
            A = J.T @ J
            g = J.T @ r
            lam *= max(1.0 / 3.0, 1.0 - (2.0 * gain - 1.0) ** 3)
            nu = 2.0
            if chi2 == 0.0:
                return LMResult(x, chi2, it, True, J, "zero residual")
            if decrease < ftol:
                return LMResult(x, chi2, it, True, J, "relative decrease below tolerance")
        else:
            lam *= nu
            nu *= 2.0
    return LMResult(x, chi2, max_iter, False, J, "maximum iterations reached")
