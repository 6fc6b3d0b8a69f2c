import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mdp_approx.inventory import APPROX_PARAMS, TRUE_PARAMS, build_inventory
from mdp_approx.mdp import FiniteMdp
from mdp_approx.mismatch import ModelPair

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_mdp(rng, n_states, n_actions, discount, sparse_rows=True):
    alpha = rng.choice([0.2, 1.0], size=n_states) if sparse_rows else np.ones(n_states)
    kernel = rng.dirichlet(alpha, size=(n_states, n_actions))
    cost = rng.uniform(0.0, 10.0, size=(n_states, n_actions))
    return FiniteMdp.from_dense(kernel, cost, discount)


def make_pair(rng, n_states, n_actions, discount, mix=0.3, noise=1.0, tol=1e-11):
    m = make_mdp(rng, n_states, n_actions, discount)
    other = make_mdp(rng, n_states, n_actions, discount)
    kernel_hat = (1 - mix) * m.transition + mix * other.transition
    cost_hat = m.cost + rng.normal(0.0, noise, size=m.cost.shape)
    return ModelPair(m, FiniteMdp.from_dense(kernel_hat, cost_hat, discount), tol=tol)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def inventory_pair():
    pair = ModelPair(build_inventory(TRUE_PARAMS), build_inventory(APPROX_PARAMS))
    pair.v_pihat  # solve both models once for the whole session
    return pair
