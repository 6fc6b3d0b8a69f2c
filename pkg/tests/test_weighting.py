import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_mdp, make_pair
from mdp_approx.mdp import AffineTransform, FiniteMdp, InvalidInputError, Policy, bellman_policy
from mdp_approx.mismatch import ModelPair
from mdp_approx.weighting import (
    WeightFn,
    check_assumptions,
    is_valid,
    kappa_model,
    kappa_policy,
    open_loop_kappas,
    weighted_norm,
)

seeds = st.integers(0, 2**32 - 1)


def test_weighted_norm_examples():
    assert weighted_norm(np.zeros(4), np.ones(4)) == 0.0
    assert weighted_norm([3.0, -4.0], [1.0, 2.0]) == 3.0


def test_weighted_norm_uniform_is_sup(rng):
    v = rng.normal(size=9)
    assert weighted_norm(v, WeightFn.ones(9)) == max(abs(x) for x in v)


def test_weighted_norm_length_mismatch():
    with pytest.raises(InvalidInputError):
        weighted_norm(np.zeros(3), np.ones(4))


@pytest.mark.parametrize("bad", [[0.5, 2.0], [1.0, np.inf], [[1.0, 1.0]]])
def test_weight_must_be_at_least_one(bad):
    with pytest.raises(InvalidInputError):
        WeightFn(bad)


def test_kappa_uniform_weight_is_one(rng):
    mdp = make_mdp(rng, 6, 3, 0.9)
    pi = Policy.stochastic(rng.dirichlet(np.ones(3), size=6))
    assert kappa_policy(mdp, pi, WeightFn.ones(6)).kappa == pytest.approx(1.0, abs=1e-15)
    assert kappa_model(mdp, WeightFn.ones(6)).kappa == pytest.approx(1.0, abs=1e-15)


def test_kappa_self_loops_is_one(rng):
    mdp = FiniteMdp.from_dense(np.eye(5)[:, None, :], np.ones((5, 1)), 0.9)
    assert kappa_policy(mdp, Policy.constant(0, 5), rng.uniform(1, 9, size=5)).kappa == 1.0


def test_kappa_model_exhaustive(rng):
    mdp = make_mdp(rng, 6, 4, 0.7)
    w = rng.uniform(1, 5, size=6)
    p = mdp.transition
    best = 0.0
    for s in range(6):
        for a in range(4):
            best = max(best, sum(w[t] * p[s, a, t] for t in range(6)) / w[s])
    assert kappa_model(mdp, w).kappa == pytest.approx(best, rel=1e-14)


def test_cert_records_cost_norm_and_validity(rng):
    mdp = make_mdp(rng, 4, 2, 0.5)
    w = rng.uniform(1, 3, size=4)
    pi = Policy.constant(1, 4)
    cert = kappa_policy(mdp, pi, w)
    assert cert.cost_norm == pytest.approx(np.max(mdp.cost[:, 1] / w))
    assert cert.gamma_kappa == pytest.approx(0.5 * cert.kappa)
    assert cert.valid == (0.5 * cert.kappa < 1 - 1e-12)
    assert kappa_model(mdp, w).cost_norm == pytest.approx(np.max(mdp.cost / w[:, None]))


def test_validity_gate_margin():
    assert is_valid(0.5, 1.9)
    assert not is_valid(0.5, 2.0)
    assert not is_valid(0.5, 2.0 - 1e-14)


def test_open_loop_kappas(rng):
    mdp = make_mdp(rng, 5, 3, 0.8)
    w = rng.uniform(1, 4, size=5)
    expected = [kappa_policy(mdp, Policy.constant(a, 5), w).kappa for a in range(3)]
    np.testing.assert_allclose(open_loop_kappas(mdp, w), expected, rtol=1e-14)


@given(seeds)
def test_policy_kappa_below_model_kappa(seed):
    rng = np.random.default_rng(seed)
    mdp = make_mdp(rng, int(rng.integers(2, 8)), int(rng.integers(1, 4)), 0.9)
    w = rng.uniform(1, 10, size=mdp.n_states)
    bar = kappa_model(mdp, w).kappa
    for _ in range(5):
        pi = Policy.stochastic(rng.dirichlet(np.ones(mdp.n_actions), size=mdp.n_states))
        assert kappa_policy(mdp, pi, w).kappa <= bar * (1 + 1e-12)


@given(seeds)
def test_weighted_contraction(seed):
    rng = np.random.default_rng(seed)
    mdp = make_mdp(rng, int(rng.integers(2, 8)), int(rng.integers(1, 4)), float(rng.uniform(0.1, 0.9)))
    w = rng.uniform(1, 3, size=mdp.n_states)
    pi = Policy.deterministic(rng.integers(mdp.n_actions, size=mdp.n_states))
    cert = kappa_policy(mdp, pi, w)
    v1, v2 = rng.normal(0, 10, size=(2, mdp.n_states))
    out1, out2 = bellman_policy(mdp, pi, v1), bellman_policy(mdp, pi, v2)
    assert np.all(np.isfinite(out1))
    lhs = weighted_norm(out1 - out2, w)
    assert lhs <= mdp.discount * cert.kappa * weighted_norm(v1 - v2, w) * (1 + 1e-12) + 1e-12


def test_identical_models_satisfy_everything(rng):
    m = make_mdp(rng, 5, 3, 0.5)
    pair = ModelPair(m, m)
    w = rng.uniform(1, 1.5, size=5)
    kappa = kappa_model(m, w).kappa
    assert is_valid(0.5, kappa)
    report = check_assumptions(pair, w, kappa, AffineTransform(1.5, 0.3))
    assert report.holds(2, 3, 4, 5, 6, 7)
    assert report.statuses[2].witnesses["pi_star in M"] == pair.pi_star


def test_invalid_kappa_fails_everything(rng):
    pair = make_pair(rng, 4, 2, 0.8)
    report = check_assumptions(pair, np.ones(4), 1.0 / 0.8)
    assert not report.gamma_kappa_valid
    assert not any(report.holds(n) for n in (2, 3, 4, 5, 6, 7))


def test_witness_too_expansive_is_not_certified(rng):
    pair = make_pair(rng, 5, 3, 0.5)
    w = rng.uniform(1, 20, size=5)
    report = check_assumptions(pair, w, 1.0)
    needed = report.kappa_needed(2)
    assert report.holds(2) == (needed <= 1.0 + 1e-12)
    assert check_assumptions(pair, w, needed).holds(2) == is_valid(0.5, needed)


def test_unknown_assumption(rng):
    with pytest.raises(InvalidInputError):
        check_assumptions(make_pair(rng, 3, 2, 0.5), np.ones(3), 1.0, which=(9,))
