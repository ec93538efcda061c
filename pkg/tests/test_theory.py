import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adanewton import AccuracyPolicy, Dataset, LossModel, RiskConfig, normalize_maxabs, synth_logistic
from adanewton.ada import theoretical_growth_safe
from adanewton.baselines import reference_optimum
from adanewton.risk import newton_decrement, newton_step
from adanewton.theory import (
    audit_step,
    eq19_upper_bound,
    estimate_lipschitz,
    lemma1_bound,
    lemma1_decomposition,
    lemma2_norm_bound,
)

from conftest import LOGISTIC_CFG, small_logistic

LOGISTIC = LossModel("logistic")
QUADRATIC = LossModel("quadratic")


def test_loss_difference_two_samples():
    data = Dataset(np.array([[1.0], [-2.0]]), np.array([1.0, -1.0]))
    w = np.array([0.3])
    f = LOGISTIC.value(data.features @ w, data.labels)
    lhs, rhs = lemma1_decomposition(data, LOGISTIC, 1, 2, w)
    assert lhs == pytest.approx((f[1] - f[0]) / 2, rel=1e-14)
    assert rhs == pytest.approx((f[1] - f[0]) / 2, rel=1e-14)


def test_loss_difference_single_increment(logistic_data):
    n = 20
    w = np.array([0.5, -1.0, 0.2, 0.0])
    f = LOGISTIC.value(logistic_data.features[:n] @ w, logistic_data.labels[:n])
    lhs, rhs = lemma1_decomposition(logistic_data, LOGISTIC, n - 1, n, w)
    expected = (f[-1] - f[:-1].mean()) / n
    assert lhs == pytest.approx(expected, rel=1e-12, abs=1e-15)
    assert rhs == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_loss_difference_random_instance(logistic_data, rng):
    w = rng.standard_normal(4)
    lhs, rhs = lemma1_decomposition(logistic_data, LOGISTIC, 7, 19, w)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 59), st.integers(1, 60), st.integers(0, 2**31 - 1))
def test_loss_difference_identity_property(m, n, seed):
    if m >= n:
        m, n = n - 1, n
    if m < 1:
        return
    data = small_logistic()
    w = np.random.default_rng(seed).standard_normal(data.p)
    lhs, rhs = lemma1_decomposition(data, LOGISTIC, m, n, w)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


def test_loss_difference_rejects_bad_sizes(logistic_data):
    with pytest.raises(ValueError):
        lemma1_decomposition(logistic_data, LOGISTIC, 5, 5, np.zeros(4))


def test_loss_difference_envelope_examples():
    inv = AccuracyPolicy("inverse_n")
    assert lemma1_bound(inv, 10, 20) == pytest.approx(1 / 10)
    assert lemma1_bound(inv, 9, 10) == pytest.approx(0.1 * (1 + 1 / 9))
    assert lemma1_bound(AccuracyPolicy("inverse_sqrt_n"), 50, 100) == pytest.approx(0.141421, abs=1e-6)


def test_minimizer_norm_bound_examples():
    assert lemma2_norm_bound(RiskConfig(c=4.0), 0.0) == pytest.approx(1.0)
    assert lemma2_norm_bound(RiskConfig(c=200.0), 1.0) == pytest.approx(1.00995, abs=1e-5)
    assert lemma2_norm_bound(RiskConfig(c=1e12), 3.0) == pytest.approx(3.0, rel=1e-9)
    with pytest.raises(ValueError):
        lemma2_norm_bound(RiskConfig(), -1.0)


def test_norm_bound_holds_for_empirical_minimizer():
    data = synth_logistic(2000, 3, seed=5, separation=0.5)
    cfg = RiskConfig(c=20.0)
    w_star = reference_optimum(data, cfg, 2000)[0]
    # the population minimizer of the ridge-free problem is the generator's truth
    assert np.linalg.norm(w_star) <= lemma2_norm_bound(cfg, np.linalg.norm(data.ground_truth))


def test_suboptimality_bound_examples():
    cfg = RiskConfig(c=200.0)
    assert eq19_upper_bound(cfg, 40, 40, 3.0) == pytest.approx(1 / 40)
    m = 50
    assert eq19_upper_bound(cfg, m, 2 * m, 0.0) == pytest.approx(4 / m)


@pytest.mark.parametrize("m,n,proxy", [(124, 248, 0.0), (100, 150, 1.3), (1000, 2000, 2.0), (7, 7, 0.5)])
def test_growth_accuracy_condition_is_144_times_bound_squared(m, n, proxy):
    cfg = RiskConfig(c=200.0)
    report = theoretical_growth_safe(cfg, m, n, proxy)
    expected = 144.0 * eq19_upper_bound(cfg, m, n, proxy) ** 2
    assert report.eq9_lhs == pytest.approx(expected, rel=1e-12)
    assert report.eq9_ok == (expected <= cfg.V(n))


def test_audit_at_optimum_is_clean(logistic_data):
    w_star = reference_optimum(logistic_data, LOGISTIC_CFG, 40)[0]
    a = audit_step(logistic_data, LOGISTIC_CFG, 40, 40, w_star, w_star, reference_opt=w_star)
    assert a.ok
    assert a.lambda_before == pytest.approx(0.0, abs=1e-7)
    assert a.lambda_after == pytest.approx(0.0, abs=1e-7)
    assert abs(a.sub_before) <= 1e-14 and abs(a.sub_after) <= 1e-14


def _point_with_decrement(data, cfg, n, target):
    """Move from the optimum along a fixed direction until the decrement hits ``target``."""
    w_star = reference_optimum(data, cfg, n)[0]
    u = np.ones(data.p) / math.sqrt(data.p)
    lo, hi = 0.0, 1.0
    while newton_decrement(data, cfg, n, w_star + hi * u) < target:
        hi *= 2
    for _ in range(80):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if newton_decrement(data, cfg, n, w_star + mid * u) < target else (lo, mid)
    return w_star + hi * u, w_star


def test_audit_contraction_at_decrement_point_two():
    data = small_logistic(300, 4, seed=2)
    cfg = RiskConfig(c=2.0)
    w_m, w_star = _point_with_decrement(data, cfg, 300, 0.2)
    w_n = newton_step(data, cfg, 300, w_m).new_point
    a = audit_step(data, cfg, 300, 300, w_m, w_n, reference_opt=w_star)
    assert a.lambda_before == pytest.approx(0.2, rel=1e-6)
    assert a.lambda_after <= 2 * 0.04 * 1.05
    assert a.sub_after <= a.bound_144 + 1e-9 * (1 + a.sub_before**2)
    assert a.ok


def test_audit_reports_violation_without_raising(logistic_data):
    w_star = reference_optimum(logistic_data, LOGISTIC_CFG, 60)[0]
    w_bad = w_star + 0.01
    a = audit_step(logistic_data, LOGISTIC_CFG, 60, 60, w_star, w_bad, reference_opt=w_star)
    assert not a.ok
    assert len(a.violations) == 2


def test_audit_does_not_mutate_inputs(logistic_data):
    w_m = np.zeros(4)
    w_n = newton_step(logistic_data, LOGISTIC_CFG, 60, w_m).new_point
    before = (w_m.copy(), w_n.copy())
    audit_step(logistic_data, LOGISTIC_CFG, 30, 60, w_m, w_n)
    np.testing.assert_array_equal(w_m, before[0])
    np.testing.assert_array_equal(w_n, before[1])


@pytest.mark.parametrize("seed", range(5))
def test_one_step_squares_suboptimality_on_small_instances(seed):
    data = small_logistic(400, 5, seed=seed)
    cfg = RiskConfig(c=5.0)
    w_star = reference_optimum(data, cfg, 400)[0]
    w_m = reference_optimum(data, cfg, 200)[0]
    w_n = newton_step(data, cfg, 400, w_m).new_point
    a = audit_step(data, cfg, 200, 400, w_m, w_n, reference_opt=w_star)
    assert a.lambda_before <= 0.25
    assert a.ok, a.violations


def test_estimate_lipschitz_examples():
    one = Dataset(np.array([[2.0, 0.0]]), np.array([1.0]))
    assert estimate_lipschitz(one, LOGISTIC) == pytest.approx(1.0)
    unit = Dataset(np.array([[1.0]]), np.array([-1.0]))
    assert estimate_lipschitz(unit, QUADRATIC) == pytest.approx(1.0)


@pytest.mark.parametrize("loss", [LOGISTIC, QUADRATIC])
def test_estimate_lipschitz_dominates_sampled_ratios(loss, rng):
    data = synth_logistic(50, 3, seed=9)
    L = estimate_lipschitz(data, loss)
    worst = 0.0
    for _ in range(100):
        i = rng.integers(data.N)
        x, y = data.features[i], data.labels[i]
        w, v = rng.standard_normal(3), rng.standard_normal(3)
        ratio = np.linalg.norm(loss.sample_gradient(w, x, y) - loss.sample_gradient(v, x, y)) / np.linalg.norm(w - v)
        worst = max(worst, ratio)
    assert worst <= L * (1 + 1e-12)


def test_growth_condition_implies_small_decrement():
    # every constant is honest: M from the data, the proxy is the generator's truth
    data = normalize_maxabs(synth_logistic(30000, 3, seed=1, separation=0.1))
    cfg = RiskConfig(c=2000.0, lipschitz_M=estimate_lipschitz(data, LOGISTIC))
    proxy = float(np.linalg.norm(data.ground_truth))
    m, n = 15000, 30000
    report = theoretical_growth_safe(cfg, m, n, proxy)
    assert report.eq8_ok
    w_m = reference_optimum(data, cfg, m)[0]
    assert newton_decrement(data, cfg, n, w_m) <= 0.25
