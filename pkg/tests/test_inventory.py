import numpy as np
import pytest
from scipy import sparse, stats
from scipy.sparse.linalg import spsolve

from mdp_approx.bounds import envelope, performance_loss_bound, witness_kappa
from mdp_approx.inventory import (
    APPROX_PARAMS,
    TRUE_PARAMS,
    ExperimentSpec,
    InventoryParams,
    base_stock,
    binomial_pmf,
    build_inventory,
    build_weight,
    run_experiment,
    stage_cost,
)
from mdp_approx.mdp import InvalidInputError, induced
from mdp_approx.mismatch import mismatch_policy
from mdp_approx.weighting import kappa_policy

# frozen after cross-checking against the outcome-by-outcome oracle below
GOLDEN_MISMATCH = 5.333582455880827
GOLDEN_KAPPA = 1.06577734375
GOLDEN_BOUND = 53.15854289475976


def small(q=0.5, n=2, s_max=3):
    return InventoryParams(s_max, 0.75, n, q, 4.0, 2.0, 5.0)


def test_params_validation():
    with pytest.raises(InvalidInputError):
        InventoryParams(0, 0.75, 10, 0.4, 4.0, 2.0, 5.0)
    with pytest.raises(InvalidInputError):
        InventoryParams(5, 0.75, 10, 1.4, 4.0, 2.0, 5.0)
    with pytest.raises(InvalidInputError):
        InventoryParams(5, 0.75, 10, 0.4, -4.0, 2.0, 5.0)


@pytest.mark.parametrize("n,q", [(10, 0.4), (10, 0.5), (30, 0.17), (0, 0.3), (4, 0.0), (4, 1.0)])
def test_binomial_pmf(n, q):
    pmf = binomial_pmf(n, q)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(pmf, stats.binom.pmf(np.arange(n + 1), n, q), atol=1e-15)


def test_hand_computed_row():
    mdp = build_inventory(small())
    s, a = 3, 1  # label 0, order one unit
    row = mdp.transition[s, a]
    # Binomial(2, 1/2) demand pushed through s + a - w: levels 1, 0, -1
    np.testing.assert_allclose(row[[4, 3, 2]], [0.25, 0.5, 0.25], atol=1e-15)
    assert row.sum() == pytest.approx(1.0, abs=1e-15)


def test_zero_demand_is_deterministic():
    p = small(q=0.0)
    mdp = build_inventory(p)
    t = mdp.transition
    labels = p.labels
    for s in range(p.n_states):
        for a in range(p.s_max + 1):
            target = np.clip(labels[s] + a, -p.s_max, p.s_max) + p.s_max
            assert t[s, a, target] == 1.0


def test_clipping_conserves_mass():
    p = small(q=0.7, n=6)
    t = build_inventory(p).transition
    np.testing.assert_allclose(t.sum(axis=2), 1.0, atol=1e-12)
    # from the bottom with no order, every demand lands on -s_max
    assert t[0, 0, 0] == pytest.approx(1.0)


def test_stage_cost_formula():
    p = small()
    c = stage_cost(p)
    assert c[p.s_max + 2, 1] == 5.0 + 4.0 * 2  # s = 2, order 1
    assert c[p.s_max - 3, 0] == 2.0 * 3  # s = -3, order 0


def test_weight_examples():
    w = build_weight(APPROX_PARAMS, 1.5e-2).weights
    labels = APPROX_PARAMS.labels
    assert w[labels == 100][0] == pytest.approx(6.7, rel=1e-15)
    assert w[labels == 0][0] == 1.0
    assert w[labels == -10][0] == pytest.approx(1 + 1.5e-2 * 20)
    assert np.all(build_weight(APPROX_PARAMS, 0.0).weights == 1.0)
    with pytest.raises(InvalidInputError):
        build_weight(APPROX_PARAMS, -1.0)


def test_base_stock():
    np.testing.assert_array_equal(base_stock(small(), 2), [5, 4, 3, 2, 1, 0, 0])


# ---------------------------------------------------------------- full-size model

def test_true_model_base_stock_level(inventory_pair):
    np.testing.assert_array_equal(inventory_pair.pi_star.actions[2:], base_stock(TRUE_PARAMS, 2)[2:])


def test_approximate_model_policy_is_order_up_to(inventory_pair):
    actions = inventory_pair.pi_hat_star.actions
    level = int(actions[APPROX_PARAMS.s_max])  # order quantity at zero stock
    np.testing.assert_array_equal(actions, np.minimum(base_stock(APPROX_PARAMS, level), APPROX_PARAMS.s_max))


def test_optimal_value_matches_linear_solve(inventory_pair):
    c, p = induced(inventory_pair.m, inventory_pair.pi_star)
    exact = spsolve(sparse.identity(p.shape[0], format="csc") - 0.75 * p.tocsc(), c)
    np.testing.assert_allclose(inventory_pair.v_star, exact, rtol=0, atol=1e-8)


def test_kappa_of_deployed_policy(inventory_pair):
    w = build_weight(APPROX_PARAMS, 1.5e-2)
    cert = kappa_policy(inventory_pair.m, inventory_pair.pi_hat_star, w)
    assert cert.kappa <= 1.07 and cert.valid


def test_golden_mismatch_against_outcome_oracle(inventory_pair):
    pair = inventory_pair
    w = build_weight(APPROX_PARAMS, 1.5e-2)
    got = mismatch_policy(pair, pair.pi_hat_star, pair.v_hat_star, w).value
    # outcome-by-outcome backup using scipy's binomial law
    v, labels, actions = pair.v_hat_star, TRUE_PARAMS.labels, pair.pi_hat_star.actions
    k = np.arange(11)

    def backup(p):
        pmf = stats.binom.pmf(k, 10, p.demand_q)
        nxt = np.clip(labels[:, None] + actions[:, None] - k[None, :], -500, 500) + 500
        cost = p.proc_cost * actions + p.hold_cost * np.maximum(labels, 0) + p.short_cost * np.maximum(-labels, 0)
        return cost + 0.75 * (v[nxt] @ pmf)

    oracle = np.max(np.abs(backup(TRUE_PARAMS) - backup(APPROX_PARAMS)) / w.weights)
    assert got == pytest.approx(oracle, rel=1e-12)
    assert got == pytest.approx(GOLDEN_MISMATCH, rel=1e-9)


def test_golden_bound(inventory_pair):
    w = build_weight(APPROX_PARAMS, 1.5e-2)
    kappa = witness_kappa(inventory_pair, w)
    assert kappa == pytest.approx(GOLDEN_KAPPA, rel=1e-12)
    report = performance_loss_bound(inventory_pair, w, kappa)
    assert report.bound == pytest.approx(GOLDEN_BOUND, rel=1e-9)
    assert report.realized <= report.bound
    assert envelope(inventory_pair, report).contains(inventory_pair.v_star, atol=1e-8)


# ---------------------------------------------------------------- experiment plumbing

def test_run_experiment_rejects_unknown():
    with pytest.raises(InvalidInputError):
        run_experiment("fig_nope", small(), small())


def test_run_experiment_rejects_mismatched_models():
    with pytest.raises(InvalidInputError):
        run_experiment("fig_im_bound", small(), small(s_max=4))


def test_small_experiment_tables():
    p, p_hat = InventoryParams(40, 0.75, 4, 0.4, 4.0, 2.0, 5.0), InventoryParams(40, 0.75, 4, 0.5, 3.8, 2.0, 5.0)
    spec = ExperimentSpec(ell=1e-2, family_ells=(0.0, 1e-2, 2e-2))
    result = run_experiment("fig_im_bound", p, p_hat, spec)
    table = result.tables[0]
    assert table.header == ["s", "V_hat_pi", "lower_weighted", "lower_sup", "V_star"]
    assert table.n_rows == 81
    assert np.all(table.column("lower_weighted") <= table.column("V_star") + 1e-8)
    family = run_experiment("fig_weight_family", p, p_hat, spec)
    assert [t.name for t in family.tables] == ["fig_weight_family_ell_0", "fig_weight_family_ell_0.01",
                                               "fig_weight_family_ell_0.02", "fig_weight_family_min"]
    no_oracle = run_experiment("fig_alpha", p, p_hat, ExperimentSpec(oracle=False))
    assert "V_star" not in no_oracle.tables[0].header
