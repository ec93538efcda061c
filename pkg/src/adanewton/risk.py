"""Regularized empirical risk R_n over a prefix S_n: value, derivatives, Newton steps.

Every function takes an optional ``work`` object. Any object with integer
attributes ``grad_units`` and ``hessian_units`` qualifies, and the counters
are incremented by the number of samples touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .model import Dataset, RiskConfig

__all__ = [
    "NewtonStepResult",
    "NotPositiveDefiniteError",
    "RiskEval",
    "WorkCounter",
    "gradient_sum",
    "newton_decrement",
    "newton_step",
    "risk_eval",
    "risk_gradient",
    "risk_hessian",
    "risk_value",
    "spd_solve",
]


class NotPositiveDefiniteError(LinAlgError):
    pass


@dataclass
class WorkCounter:
    grad_units: int = 0
    hessian_units: int = 0


@dataclass
class RiskEval:
    value: float
    gradient: np.ndarray
    n: int
    hessian: np.ndarray | None = None


@dataclass
class NewtonStepResult:
    new_point: np.ndarray
    decrement: float
    direction: np.ndarray
    gradient: np.ndarray


def _check_w(data: Dataset, n: int, w) -> np.ndarray:
    if not 1 <= n <= data.N:
        raise ValueError(f"sample size {n} outside [1, {data.N}]")
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (data.p,):
        raise ValueError(f"w has shape {w.shape}, expected ({data.p},)")
    if not np.all(np.isfinite(w)):
        raise FloatingPointError("w contains non-finite entries")
    return w


def _finite(x, what: str):
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"{what} is not finite")
    return x


def gradient_sum(data: Dataset, cfg: RiskConfig, lo: int, hi: int, w, work=None) -> np.ndarray:
    """Unnormalized sum of per-sample loss gradients over rows ``lo..hi-1``."""
    w = np.asarray(w, dtype=np.float64)
    X = data.features[lo:hi]
    y = data.labels[lo:hi]
    s = X.T @ cfg.loss.slope(X @ w, y)
    if work is not None:
        work.grad_units += hi - lo
    return _finite(s, "gradient")


def risk_value(data: Dataset, cfg: RiskConfig, n: int, w) -> float:
    w = _check_w(data, n, w)
    X, y = data.prefix(n)
    value = float(np.mean(cfg.loss.value(X @ w, y)) + 0.5 * cfg.reg(n) * (w @ w))
    return _finite(value, "risk value")


def risk_eval(data: Dataset, cfg: RiskConfig, n: int, w, work=None, hessian=False) -> RiskEval:
    """Value and gradient (and optionally Hessian) from one pass over S_n."""
    w = _check_w(data, n, w)
    X, y = data.prefix(n)
    z = X @ w
    reg = cfg.reg(n)
    value = _finite(float(np.mean(cfg.loss.value(z, y)) + 0.5 * reg * (w @ w)), "risk value")
    grad = _finite(X.T @ cfg.loss.slope(z, y) / n + reg * w, "gradient")
    if work is not None:
        work.grad_units += n
    H = None
    if hessian:
        H = _hessian_from_margins(X, cfg.loss.curvature(z, y), n, reg)
        if work is not None:
            work.hessian_units += n
    return RiskEval(value, grad, n, H)


def risk_gradient(data: Dataset, cfg: RiskConfig, n: int, w, work=None) -> np.ndarray:
    w = _check_w(data, n, w)
    return gradient_sum(data, cfg, 0, n, w, work) / n + cfg.reg(n) * w


def _hessian_from_margins(X, curv, n, reg):
    H = (X.T * curv) @ X / n
    H = 0.5 * (H + H.T)
    H[np.diag_indices_from(H)] += reg
    return _finite(H, "Hessian")


def risk_hessian(data: Dataset, cfg: RiskConfig, n: int, w, work=None) -> np.ndarray:
    w = _check_w(data, n, w)
    X, y = data.prefix(n)
    H = _hessian_from_margins(X, cfg.loss.curvature(X @ w, y), n, cfg.reg(n))
    if work is not None:
        work.hessian_units += n
    return H


def spd_solve(H, g) -> np.ndarray:
    """Solve ``H d = g`` through a Cholesky factorization of the SPD matrix ``H``."""
    try:
        factor = cho_factor(H, lower=True, check_finite=True)
    except LinAlgError as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {exc}") from exc
    return cho_solve(factor, g)


def newton_step(data: Dataset, cfg: RiskConfig, n: int, w, work=None) -> NewtonStepResult:
    """One unit-length Newton step on R_n from ``w``."""
    w = _check_w(data, n, w)
    g = risk_gradient(data, cfg, n, w, work)
    H = risk_hessian(data, cfg, n, w, work)
    d = spd_solve(H, g)
    return NewtonStepResult(w - d, _decrement(g, d), d, g)


def _decrement(g, d) -> float:
    # g^T H^{-1} g is nonnegative in exact arithmetic; clip rounding noise
    return float(np.sqrt(max(float(g @ d), 0.0)))


def newton_decrement(data: Dataset, cfg: RiskConfig, n: int, w, work=None) -> float:
    return newton_step(data, cfg, n, w, work).decrement
