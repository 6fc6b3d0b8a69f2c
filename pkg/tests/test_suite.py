import numpy as np

from mdp_approx.ipm import IpmKind
from mdp_approx.suite import SuiteResult, random_lqr_pair, random_metric, run_lqr_suite, run_random_suite


def test_random_metric_is_valid():
    rng = np.random.default_rng(0)
    for n in range(2, 9):
        IpmKind.wasserstein(random_metric(rng, n))  # validates the axioms


def test_small_battery_has_no_violations():
    result = run_random_suite(instances=12, seed=3, duality_samples=50)
    assert result.instances == 12
    assert result.passed, result.summary()
    assert result.checks["duality[weighted_tv]"] == 50
    assert any(name.startswith("Thm5") for name in result.checks)


def test_lqr_sweep_no_violations():
    result = run_lqr_suite(pairs=10, seed=1)
    assert result.instances == 10 and result.passed
    assert result.checks["Prop1[1d]"] == 5 and result.checks["Prop1[2d]"] == 5


def test_violation_is_recorded():
    result = SuiteResult()
    result.record("x", True)
    result.record("x", False, (1, 2))
    assert not result.passed
    assert "VIOLATION x: (1, 2)" in result.summary()


def test_lqr_pair_shapes():
    m, m_hat = random_lqr_pair(np.random.default_rng(0), 2, 1)
    assert m.a_mat.shape == m_hat.a_mat.shape == (2, 2)
    assert m.b_mat.shape == (2, 1)
