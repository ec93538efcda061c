import numpy as np
import pytest

from adanewton import AccuracyPolicy, Dataset, LossModel, RiskConfig, normalize_maxabs, synth_logistic


def small_logistic(n=60, p=4, seed=0, separation=1.0, normalize=True):
    data = synth_logistic(n, p, seed, separation)
    return normalize_maxabs(data) if normalize else data


def quadratic_data(n=30, p=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    return Dataset(X, y, seed)


LOGISTIC_CFG = RiskConfig(c=200.0, policy=AccuracyPolicy("inverse_n"), lipschitz_M=1.0)
QUADRATIC_CFG = RiskConfig(c=2.0, policy=AccuracyPolicy("inverse_n"), loss=LossModel("quadratic"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def logistic_data():
    return small_logistic()


def pytest_terminal_summary(terminalreporter):
    reports = [
        r
        for key in ("passed", "failed")
        for r in terminalreporter.stats.get(key, [])
        if r.when == "call" and "test_acceptance.py" in r.nodeid
    ]
    if not reports:
        return
    terminalreporter.section("acceptance criteria")
    for r in sorted(reports, key=lambda r: r.nodeid):
        name = r.nodeid.split("::")[-1]
        terminalreporter.write_line(f"{'PASS' if r.passed else 'FAIL'}  {name}")
