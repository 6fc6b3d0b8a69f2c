import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_mdp, make_pair
from mdp_approx.mdp import IDENTITY, AffineTransform, FiniteMdp, InvalidInputError, Policy
from mdp_approx.mismatch import (
    ModelPair,
    mismatch_max,
    mismatch_optimal,
    mismatch_policy,
    mismatch_policy_pair,
)

seeds = st.integers(0, 2**32 - 1)


def per_state_oracle(pair, pi, pi_hat, v, w, a1=1.0, a2=0.0):
    """max_s |sum_a pi(a|s) xi_alpha(s, a) ...| / w(s) with the kernels read entry by entry."""
    m, mh = pair.m, pair.m_hat
    p, ph = m.transition, mh.transition
    n_s, n_a = m.n_states, m.n_actions
    pm, phm = pi.matrix(n_a), pi_hat.matrix(n_a)
    best = 0.0
    for s in range(n_s):
        lhs = sum(pm[s, a] * (a1 * m.cost[s, a] + a2 + m.discount * sum(p[s, a, t] * v[t] for t in range(n_s)))
                  for a in range(n_a))
        rhs = sum(phm[s, a] * (mh.cost[s, a] + mh.discount * sum(ph[s, a, t] * v[t] for t in range(n_s)))
                  for a in range(n_a))
        best = max(best, abs(lhs - rhs) / w[s])
    return best


def test_identical_models_have_zero_mismatch(rng):
    m = make_mdp(rng, 5, 3, 0.7)
    pair = ModelPair(m, m)
    v, w = rng.normal(size=5), rng.uniform(1, 3, size=5)
    pi = Policy.stochastic(rng.dirichlet(np.ones(3), size=5))
    assert mismatch_policy_pair(pair, pi, pi, v, w).value == 0.0
    assert mismatch_policy(pair, pi, v, w).value == 0.0
    assert mismatch_optimal(pair, v, w).value == 0.0
    assert mismatch_max(pair, v, w).value == 0.0


def test_exact_transform_cancels(rng):
    m = make_mdp(rng, 4, 2, 0.6)
    t = AffineTransform(2.0, 1.0)
    pair = ModelPair(m, m.transformed(t))
    v, w = rng.normal(size=4), np.ones(4)
    pi = Policy.constant(1, 4)
    assert mismatch_policy(pair, pi, v, w, t).value == pytest.approx(0.0, abs=1e-12)
    assert mismatch_max(pair, v, w, t).value == pytest.approx(0.0, abs=1e-12)
    assert mismatch_policy(pair, pi, v, w).value > 0


def test_pair_mismatch_matches_per_state_oracle(rng):
    pair = make_pair(rng, 5, 3, 0.8)
    v, w = rng.normal(0, 5, size=5), rng.uniform(1, 4, size=5)
    pi = Policy.stochastic(rng.dirichlet(np.ones(3), size=5))
    pi_hat = Policy.deterministic(rng.integers(3, size=5))
    t = AffineTransform(0.7, 1.3)
    got = mismatch_policy_pair(pair, pi, pi_hat, v, w, t)
    assert got.value == pytest.approx(per_state_oracle(pair, pi, pi_hat, v, w, 0.7, 1.3), rel=1e-12)
    assert got.kind == "policy_pair"
    assert 0 <= got.state < 5


def test_constant_cost_shift(rng):
    m = make_mdp(rng, 4, 3, 0.5)
    d = -2.5
    pair = ModelPair(m, FiniteMdp.from_dense(m.transition, m.cost + d, 0.5))
    v = rng.normal(size=4)
    assert mismatch_max(pair, v, np.ones(4)).value == pytest.approx(abs(d), abs=1e-12)
    assert mismatch_optimal(pair, v, np.ones(4)).value == pytest.approx(abs(d), abs=1e-12)


def test_single_action_optimal_equals_policy(rng):
    pair = make_pair(rng, 5, 1, 0.7)
    v, w = rng.normal(size=5), rng.uniform(1, 2, size=5)
    only = Policy.constant(0, 5)
    assert mismatch_optimal(pair, v, w).value == pytest.approx(mismatch_policy(pair, only, v, w).value, rel=1e-14)


def test_max_equals_sup_over_enumerated_policies(rng):
    for _ in range(10):
        pair = make_pair(rng, 3, 2, 0.7)
        v, w = rng.normal(0, 3, size=3), rng.uniform(1, 3, size=3)
        t = AffineTransform(1.2, -0.5)
        enumerated = max(mismatch_policy(pair, Policy.deterministic(list(a)), v, w, t).value
                         for a in itertools.product(range(2), repeat=3))
        assert mismatch_max(pair, v, w, t).value == pytest.approx(enumerated, rel=1e-13)


def test_max_reports_argmax(rng):
    pair = make_pair(rng, 6, 3, 0.8)
    v, w = rng.normal(size=6), rng.uniform(1, 3, size=6)
    out = mismatch_max(pair, v, w)
    single = mismatch_policy(pair, Policy.constant(out.action, 6), v, w)
    assert single.value == pytest.approx(out.value, rel=1e-14)
    assert single.state == out.state


def test_weighted_below_sup(rng):
    pair = make_pair(rng, 6, 2, 0.8)
    v = rng.normal(size=6)
    pi = pair.pi_hat_star
    assert mismatch_policy(pair, pi, v, rng.uniform(1, 4, size=6)).value <= mismatch_policy(pair, pi, v, np.ones(6)).value


@given(seeds)
def test_mismatch_orderings(seed):
    rng = np.random.default_rng(seed)
    pair = make_pair(rng, int(rng.integers(2, 7)), int(rng.integers(1, 4)), 0.7)
    n = pair.n_states
    v, w = rng.normal(0, 5, size=n), rng.uniform(1, 5, size=n)
    t = AffineTransform(float(rng.uniform(0.5, 2)), float(rng.uniform(-1, 1)))
    top = mismatch_max(pair, v, w, t).value
    assert mismatch_optimal(pair, v, w, t).value <= top + 1e-12
    pi = Policy.stochastic(rng.dirichlet(np.ones(pair.m.n_actions), size=n))
    assert 0 <= mismatch_policy(pair, pi, v, w, t).value <= top + 1e-12


@given(seeds, st.floats(0.2, 3.0), st.floats(-3.0, 3.0))
def test_transform_is_a_cost_rewrite(seed, a1, a2):
    rng = np.random.default_rng(seed)
    pair = make_pair(rng, 4, 3, 0.6)
    t = AffineTransform(a1, a2)
    rewritten = ModelPair(pair.m.transformed(t), pair.m_hat)
    v, w = rng.normal(size=4), rng.uniform(1, 3, size=4)
    pi = Policy.deterministic(rng.integers(3, size=4))
    for fn in (lambda p, tr: mismatch_policy(p, pi, v, w, tr), lambda p, tr: mismatch_optimal(p, v, w, tr),
               lambda p, tr: mismatch_max(p, v, w, tr)):
        assert fn(pair, t).value == pytest.approx(fn(rewritten, IDENTITY).value, rel=1e-12, abs=1e-12)


def test_pair_requires_matching_spaces(rng):
    with pytest.raises(InvalidInputError):
        ModelPair(make_mdp(rng, 3, 2, 0.5), make_mdp(rng, 4, 2, 0.5))
    with pytest.raises(InvalidInputError):
        ModelPair(make_mdp(rng, 3, 2, 0.5), make_mdp(rng, 3, 2, 0.6))
