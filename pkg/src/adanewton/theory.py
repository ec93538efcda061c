"""Runtime diagnostics: loss-difference identity, norm and suboptimality envelopes,
per-step audits, and Lipschitz estimates.

Unknowable quantities such as the norm of the population minimizer enter
only through explicit proxy arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import AccuracyPolicy, Dataset, LossModel, RiskConfig, accuracy
from .risk import newton_decrement, risk_value

__all__ = [
    "StepAudit",
    "audit_step",
    "eq19_upper_bound",
    "estimate_lipschitz",
    "lemma1_bound",
    "lemma1_decomposition",
    "lemma2_norm_bound",
]


def lemma1_decomposition(data: Dataset, loss: LossModel, m: int, n: int, w) -> tuple[float, float]:
    """Both sides of ``L_n - L_m = ((n-m)/n) * (mean over new rows - mean over S_m)``.

    The left side is formed from the two prefix means directly; the right side
    from the per-block means.
    """
    if not 1 <= m < n <= data.N:
        raise ValueError("need 1 <= m < n <= N")
    f = loss.value(data.features[:n] @ np.asarray(w, dtype=float), data.labels[:n])
    lhs = float(np.mean(f) - np.mean(f[:m]))
    rhs = float((n - m) / n * (np.mean(f[m:]) - np.mean(f[:m])))
    return lhs, rhs


def lemma1_bound(policy: AccuracyPolicy, m: int, n: int) -> float:
    """Envelope ((n-m)/n) (V_{n-m} + V_m) on the loss difference between S_n and S_m."""
    if not 1 <= m < n:
        raise ValueError("need 1 <= m < n")
    return (n - m) / n * (accuracy(policy, n - m) + accuracy(policy, m))


def lemma2_norm_bound(cfg: RiskConfig, w_star_norm_proxy: float) -> float:
    """Bound sqrt(4/c + ||w*||^2) on the norm of any regularized empirical minimizer."""
    if w_star_norm_proxy < 0:
        raise ValueError("norm proxy must be nonnegative")
    return math.sqrt(4.0 / cfg.c + w_star_norm_proxy**2)


def eq19_upper_bound(cfg: RiskConfig, m: int, n: int, w_star_norm_proxy: float) -> float:
    """Upper bound on R_n(w_m) - R_n(w*_n) for a V_m-optimal w_m of R_m."""
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    Vm, Vn = cfg.V(m), cfg.V(n)
    growth = 0.0 if n == m else 2.0 * (n - m) / n * (cfg.V(n - m) + Vm)
    return Vm + growth + 2.0 * (Vm - Vn) + 0.5 * cfg.c * (Vm - Vn) * w_star_norm_proxy**2


@dataclass
class StepAudit:
    m: int
    n: int
    lambda_before: float
    lambda_after: float
    sub_before: float
    sub_after: float
    bound_144: float
    bound_eq19: float
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def audit_step(
    data: Dataset,
    cfg: RiskConfig,
    m: int,
    n: int,
    w_m,
    w_n,
    reference_opt=None,
    w_star_norm_proxy: float | None = None,
) -> StepAudit:
    """Measure one growth step m -> n against the decrement and suboptimality bounds.

    Suboptimalities are NaN when no reference optimum of R_n is supplied.
    Violations are reported in ``violations``; nothing is raised.
    """
    lam_before = newton_decrement(data, cfg, n, w_m)
    lam_after = newton_decrement(data, cfg, n, w_n)
    proxy = float(np.linalg.norm(w_n)) if w_star_norm_proxy is None else w_star_norm_proxy
    audit = StepAudit(
        m=m,
        n=n,
        lambda_before=lam_before,
        lambda_after=lam_after,
        sub_before=float("nan"),
        sub_after=float("nan"),
        bound_144=float("nan"),
        bound_eq19=eq19_upper_bound(cfg, min(m, n), n, proxy),
    )
    # decrements near 1e-9 are rounding noise of sqrt(g.d)
    if lam_before <= 0.25 and lam_after > 2.0 * lam_before**2 * 1.05 + 1e-9:
        audit.violations.append(
            f"decrement contraction: {lam_after:.3e} > 2.1 * {lam_before:.3e}^2"
        )
    if reference_opt is not None:
        r_star = risk_value(data, cfg, n, reference_opt)
        audit.sub_before = risk_value(data, cfg, n, w_m) - r_star
        audit.sub_after = risk_value(data, cfg, n, w_n) - r_star
        audit.bound_144 = 144.0 * audit.sub_before**2
        tol = 1e-9 * (1.0 + audit.sub_before**2)
        if lam_before <= 0.25 and audit.sub_after > audit.bound_144 + tol:
            audit.violations.append(
                f"suboptimality {audit.sub_after:.3e} > 144 * {audit.sub_before:.3e}^2"
            )
    return audit


def estimate_lipschitz(data: Dataset, loss: LossModel) -> float:
    """Per-sample gradient Lipschitz constant: max ||x||^2 / 4 (logistic) or max ||x||^2."""
    sq = float(np.max(np.einsum("ij,ij->i", data.features, data.features)))
    return sq / 4.0 if loss.kind == "logistic" else sq
