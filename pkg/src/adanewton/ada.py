"""Ada Newton: single Newton steps on geometrically growing sample sizes.

The driver keeps the unnormalized gradient sum over the certified prefix
S_m, so the gradient at the next size only touches the new rows.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .model import Dataset, RiskConfig
from .risk import _decrement, gradient_sum, newton_decrement, risk_gradient, risk_hessian, spd_solve
from .trace import Recorder, TraceEvent

log = logging.getLogger(__name__)

__all__ = [
    "AdaNewtonConfig",
    "AdaNewtonError",
    "GrowthReport",
    "InvalidInitializationError",
    "SolverState",
    "ada_newton",
    "certificate_holds",
    "certificate_threshold",
    "prop1_min_c",
    "theoretical_growth_safe",
    "warmup",
]


class AdaNewtonError(RuntimeError):
    pass


class InvalidInitializationError(AdaNewtonError):
    pass


@dataclass(frozen=True)
class AdaNewtonConfig:
    alpha0: float = 2.0
    beta: float = 0.5
    m0: int = 124
    warmup_steps: int = 100
    warmup_stepsize: float = 1e-3
    max_backtracks: int = 10

    def __post_init__(self):
        if not self.alpha0 > 1:
            raise ValueError("alpha0 must exceed 1")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.m0 < 1:
            raise ValueError("m0 must be at least 1")
        if self.warmup_steps < 0 or not self.warmup_stepsize > 0:
            raise ValueError("warmup needs steps >= 0 and a positive stepsize")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be at least 1")


@dataclass
class SolverState:
    w: np.ndarray
    n: int
    grad_units: int = 0
    hessian_units: int = 0
    hessian_inversions: int = 0
    wall_time: float = 0.0
    status: str = "running"
    events: list[TraceEvent] = field(default_factory=list, repr=False)


def certificate_threshold(cfg: RiskConfig, n: int) -> float:
    """Gradient-norm level sqrt(2c) * V_n below which R_n is solved to accuracy V_n."""
    return math.sqrt(2.0 * cfg.c) * cfg.V(n)


def certificate_holds(data: Dataset, cfg: RiskConfig, n: int, w, work=None) -> tuple[bool, float]:
    """Return ``(passed, ||grad R_n(w)||)``."""
    gnorm = float(np.linalg.norm(risk_gradient(data, cfg, n, w, work)))
    return gnorm <= certificate_threshold(cfg, n), gnorm


def warmup(data: Dataset, cfg: RiskConfig, acfg: AdaNewtonConfig) -> SolverState:
    """Fixed-stepsize gradient descent on R_{m0} starting from zero."""
    m0 = acfg.m0
    if m0 > data.N:
        raise ValueError(f"m0={m0} exceeds the dataset size {data.N}")
    state = SolverState(w=np.zeros(data.p), n=m0)
    w = state.w
    for k in range(acfg.warmup_steps):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                w = w - acfg.warmup_stepsize * risk_gradient(data, cfg, m0, w, state)
        except FloatingPointError as exc:
            raise AdaNewtonError(
                f"warmup diverged at step {k} (stepsize {acfg.warmup_stepsize} too large?)"
            ) from exc
        if not np.all(np.isfinite(w)):
            raise AdaNewtonError(
                f"warmup iterate became non-finite at step {k} "
                f"(stepsize {acfg.warmup_stepsize} too large?)"
            )
    state.w = w
    return state


def _grown_size(alpha: float, m: int, N: int) -> int | None:
    """min(ceil(alpha*m), N), at least m+1; None when alpha*m no longer exceeds m."""
    if alpha * m <= m:
        return None
    # round away float noise such as 1.1 * 100 = 110.00000000000001
    return max(min(math.ceil(round(alpha * m, 9)), N), m + 1)


def ada_newton(
    data: Dataset,
    cfg: RiskConfig,
    acfg: AdaNewtonConfig = AdaNewtonConfig(),
    sink=None,
    audit: bool = False,
    budget: float | None = None,
    state: SolverState | None = None,
) -> tuple[SolverState, list[TraceEvent]]:
    """Run Ada Newton until the certificate holds on the full dataset.

    Parameters
    ----------
    sink : callable, optional
        Receives every :class:`TraceEvent` as it is emitted.
    audit : bool
        Also measure the Newton decrement at each new iterate. The extra
        Hessian is not charged to the work counters and does not affect the
        trajectory.
    budget : float, optional
        Stop early once this many gradient units have been spent.
    state : SolverState, optional
        A certified starting point; by default :func:`warmup` produces one.

    Returns
    -------
    state, events
    """
    N = data.N
    rec = Recorder(N, sink)
    if state is None:
        state = warmup(data, cfg, acfg)
    S = gradient_sum(data, cfg, 0, state.n, state.w, state)
    gnorm = float(np.linalg.norm(S / state.n + cfg.reg(state.n) * state.w))
    if gnorm > certificate_threshold(cfg, state.n):
        raise InvalidInitializationError(
            f"initial point is not certified at n={state.n}: gradient norm {gnorm:.4g} "
            f"> threshold {certificate_threshold(cfg, state.n):.4g}"
        )
    rec.emit("warmup_done", state, state.n, state.w, gnorm)

    while state.n < N:
        if budget is not None and state.grad_units >= budget:
            state.status = "budget"
            break
        m, w_m, S_m = state.n, state.w, S
        alpha = acfg.alpha0
        prev = None
        last = None
        for _ in range(acfg.max_backtracks):
            n = _grown_size(alpha, m, N)
            while n is not None and prev is not None and n >= prev:
                alpha *= acfg.beta
                n = _grown_size(alpha, m, N)
            if n is None:
                break
            prev = n
            grad = (S_m + gradient_sum(data, cfg, m, n, w_m, state)) / n + cfg.reg(n) * w_m
            H = risk_hessian(data, cfg, n, w_m, state)
            d = spd_solve(H, grad)
            state.hessian_inversions += 1
            lam = _decrement(grad, d)
            w_n = w_m - d
            S_n = gradient_sum(data, cfg, 0, n, w_n, state)
            gnorm = float(np.linalg.norm(S_n / n + cfg.reg(n) * w_n))
            lam_after = newton_decrement(data, cfg, n, w_n) if audit else float("nan")
            last = (n, w_n, S_n, gnorm)
            if gnorm <= certificate_threshold(cfg, n):
                state.w, state.n, S = w_n, n, S_n
                rec.emit("step_accepted", state, n, w_n, gnorm, decrement=lam,
                         decrement_after=lam_after, m=m)
                break
            rec.emit("step_backtracked", state, n, w_n, gnorm, decrement=lam,
                     decrement_after=lam_after, m=m)
            log.debug("backtrack: n=%d grad norm %.3g above threshold", n, gnorm)
            alpha *= acfg.beta
        if state.n == m:
            S = _fallback(data, cfg, acfg, state, rec, m, last, audit)

    state.wall_time = rec.clock.elapsed()
    if state.status == "running":
        state.status = "converged"
    rec.emit("finished", state, state.n, state.w, gnorm, note=state.status)
    state.events = rec.events
    return state, rec.events


def _fallback(data, cfg, acfg, state, rec, m, last, audit):
    """Extra Newton steps at the smallest attempted size until it certifies.

    Steps are damped by 1/(1+lambda) outside the quadratic region lambda <= 1/4.
    """
    n, w, S, gnorm = last
    for _ in range(acfg.max_backtracks):
        grad = S / n + cfg.reg(n) * w
        H = risk_hessian(data, cfg, n, w, state)
        d = spd_solve(H, grad)
        state.hessian_inversions += 1
        lam = _decrement(grad, d)
        step = 1.0 if lam <= 0.25 else 1.0 / (1.0 + lam)
        w = w - step * d
        S = gradient_sum(data, cfg, 0, n, w, state)
        gnorm = float(np.linalg.norm(S / n + cfg.reg(n) * w))
        lam_after = newton_decrement(data, cfg, n, w) if audit else float("nan")
        if gnorm <= certificate_threshold(cfg, n):
            state.w, state.n = w, n
            rec.emit("step_accepted", state, n, w, gnorm, decrement=lam,
                     decrement_after=lam_after, m=m, note="fallback")
            return S
        rec.emit("step_backtracked", state, n, w, gnorm, decrement=lam,
                 decrement_after=lam_after, m=m, note="fallback")
    raise AdaNewtonError(
        f"certificate still fails at n={n} after {acfg.max_backtracks} backtracks and "
        f"{acfg.max_backtracks} extra Newton steps (gradient norm {gnorm:.4g})"
    )


@dataclass
class GrowthReport:
    """Left-hand sides of the two sample-growth conditions (diagnostic only)."""

    eq8_lhs: float
    eq8_ok: bool
    eq9_lhs: float
    eq9_ok: bool
    eq8_terms: tuple[float, float, float]
    # (2+sqrt2)sqrt(c) in the third term equals sqrt(2c) + 2sqrt(c)
    note: str = "third summand constant (2+sqrt2)sqrt(c) == sqrt(2c)+2sqrt(c)"


def _V_gap(cfg: RiskConfig, m: int, n: int) -> float:
    return cfg.V(n - m) if n > m else 0.0


def theoretical_growth_safe(cfg: RiskConfig, m: int, n: int, w_star_norm_proxy: float) -> GrowthReport:
    """Evaluate both growth conditions for moving from m to n samples.

    ``w_star_norm_proxy`` stands in for the unknown norm of the population
    minimizer. Nothing here gates a run.
    """
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    c, M = cfg.c, cfg.lipschitz_M
    Vm, Vn = cfg.V(m), cfg.V(n)
    w2 = w_star_norm_proxy
    t1 = math.sqrt(2.0 * (M + c * Vm) * Vm / (c * Vn))
    t2 = 2.0 * (n - m) / (n * math.sqrt(c))
    t3 = ((2.0 + math.sqrt(2.0)) * math.sqrt(c) + c * w2) * (Vm - Vn) / math.sqrt(c * Vn)
    eq8 = t1 + t2 + t3
    inner = (
        Vm
        + 2.0 * (n - m) / n * (_V_gap(cfg, m, n) + Vm)
        + 2.0 * (Vm - Vn)
        + 0.5 * c * (Vm - Vn) * w2 * w2
    )
    eq9 = 144.0 * inner * inner
    return GrowthReport(eq8, eq8 <= 0.25, eq9, eq9 <= Vn, (t1, t2, t3))


def prop1_min_c(M: float, alpha: float) -> float:
    """Smallest c with sqrt(2 alpha M / c) + 2 alpha / ((alpha-1) sqrt(c)) = 1/4.

    Both terms are linear in u = c^{-1/2}, so the boundary is explicit.
    """
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    if M < 0:
        raise ValueError("M must be nonnegative")
    coef = math.sqrt(2.0 * alpha * M) + 2.0 * alpha / (alpha - 1.0)
    return (4.0 * coef) ** 2
