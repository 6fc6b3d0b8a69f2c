"""Randomised soundness battery: every certified bound must dominate the quantity it bounds."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .bounds import (
    PERFORMANCE_VARIANTS,
    VALUE_VARIANTS,
    openloop_bound,
    performance_loss_bound,
    policy_error_bound,
    value_error_bound,
)
from .ipm import (
    IPM_VARIANTS,
    IpmKind,
    ipm_distance,
    ipm_performance_bound,
    minkowski,
    mismatch_from_distance,
    model_distance,
)
from .lqr import LqrModel, lqr_performance_bound, realized_gap
from .mdp import IDENTITY, AffineTransform, ConvergenceError, FiniteMdp, Policy
from .mismatch import ModelPair, mismatch_max, mismatch_optimal, mismatch_policy, mismatch_policy_pair
from .weighting import WeightFn, check_assumptions, is_valid, kappa_policy

SLACK = 1e-8
SUITE_TOL = 1e-11


@dataclass
class SuiteResult:
    instances: int = 0
    checks: Counter = field(default_factory=Counter)
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def record(self, name: str, ok: bool, detail=None) -> None:
        self.checks[name] += 1
        if not ok:
            self.violations.append((name, detail))

    def summary(self) -> str:
        lines = [f"instances: {self.instances}", f"checks: {sum(self.checks.values())}",
                 f"violations: {len(self.violations)}"]
        lines += [f"  {name}: {count}" for name, count in sorted(self.checks.items())]
        lines += [f"  VIOLATION {name}: {detail}" for name, detail in self.violations]
        return "\n".join(lines)


def random_mdp(rng: np.random.Generator, n_states: int, n_actions: int, discount: float) -> FiniteMdp:
    # sparse-ish Dirichlet rows so stability constants vary between instances
    alpha = rng.choice([0.2, 1.0], size=n_states)
    kernel = rng.dirichlet(alpha, size=(n_states, n_actions))
    cost = rng.uniform(0.0, 10.0, size=(n_states, n_actions))
    return FiniteMdp.from_dense(kernel, cost, discount)


def random_pair(rng: np.random.Generator, max_states: int = 8, max_actions: int = 4) -> ModelPair:
    n_s = int(rng.integers(2, max_states + 1))
    n_a = int(rng.integers(1, max_actions + 1))
    gamma = float(rng.uniform(0.1, 0.75))
    m = random_mdp(rng, n_s, n_a, gamma)
    other = random_mdp(rng, n_s, n_a, gamma)
    mix = float(rng.uniform(0.0, 0.5))
    kernel_hat = (1 - mix) * m.transition + mix * other.transition
    cost_hat = m.cost + rng.normal(0.0, rng.uniform(0.0, 2.0), size=m.cost.shape)
    m_hat = FiniteMdp.from_dense(kernel_hat, cost_hat, gamma)
    return ModelPair(m, m_hat, tol=SUITE_TOL)


def random_policy(rng: np.random.Generator, n_states: int, n_actions: int) -> Policy:
    if rng.random() < 0.5:
        return Policy.deterministic(rng.integers(n_actions, size=n_states))
    return Policy.stochastic(rng.dirichlet(np.ones(n_actions), size=n_states))


def random_transform(rng: np.random.Generator) -> AffineTransform:
    if rng.random() < 0.3:
        return IDENTITY
    return AffineTransform(float(rng.uniform(0.5, 2.0)), float(rng.uniform(-2.0, 2.0)))


def random_metric(rng: np.random.Generator, n: int) -> np.ndarray:
    """Shortest-path metric of a random complete graph (always a valid metric)."""
    d = rng.uniform(0.5, 3.0, size=(n, n))
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    for k in range(n):
        d = np.minimum(d, d[:, k, None] + d[None, k, :])
    return d


def _needed_kappa(pair, w, transform, required) -> float:
    return check_assumptions(pair, w, 1.0, transform, which=required).kappa_needed(*required)


def _check_report(result: SuiteResult, name: str, report, instance: int) -> None:
    if not report.certified:
        return
    ok = report.realized <= report.bound + SLACK
    result.record(name, ok, (instance, report.realized, report.bound))


def check_instance(pair: ModelPair, w: WeightFn, rng: np.random.Generator, result: SuiteResult,
                   instance: int, general_metric: bool = False) -> None:
    m, gamma = pair.m, pair.discount
    n_s, n_a = m.n_states, m.n_actions
    transform = random_transform(rng)
    kinds = [IpmKind.total_variation(), IpmKind.wasserstein(), IpmKind.weighted_tv(w)]
    if general_metric:
        kinds.append(IpmKind.wasserstein(random_metric(rng, n_s)))

    # policy error for arbitrary policies
    pi, pi_hat = random_policy(rng, n_s, n_a), random_policy(rng, n_s, n_a)
    kappa = max(kappa_policy(m, pi, w).kappa, kappa_policy(pair.m_hat, pi_hat, w).kappa)
    if is_valid(gamma, kappa):
        _check_report(result, "Lem2", policy_error_bound(pair, pi, pi_hat, w, kappa, transform), instance)

    n1, n2 = (3, 4) if transform.is_identity else (6, 7)
    needed = {"pair_hatV": (2,), "pair_V": (2,), "opt_hatV": (2, n1), "opt_V": (2, n2),
              "part1_hatV": (2,), "part1_V": (2,), "part2": (2, n1), "part3": (2, n2)}
    for variant in VALUE_VARIANTS:
        kappa = _needed_kappa(pair, w, transform, needed[variant])
        if is_valid(gamma, kappa):
            _check_report(result, f"Lem3.{variant}", value_error_bound(pair, w, kappa, variant, transform), instance)

    for variant in PERFORMANCE_VARIANTS:
        kappa = _needed_kappa(pair, w, transform, needed[variant])
        if is_valid(gamma, kappa):
            report = performance_loss_bound(pair, w, kappa, transform, variant)
            _check_report(result, f"Thm1/3.{variant}", report, instance)

    kappa_ol = _needed_kappa(pair, w, transform, (2, 5))
    if is_valid(gamma, kappa_ol):
        for use in ("hatV", "V"):
            report = openloop_bound(pair, w, kappa_ol, transform, use)
            _check_report(result, f"Thm2/4.{use}", report, instance)
            if use == "hatV":
                openloop_hat = report
        # the open-loop assumption covers the greedy witnesses, so the same kappa serves part 2
        same = performance_loss_bound(pair, w, kappa_ol, transform, "part2")
        result.record("Thm2 >= Thm1.part2", openloop_hat.bound >= same.bound - SLACK,
                      (instance, openloop_hat.bound, same.bound))
        for kind in kinds:
            for variant in IPM_VARIANTS:
                report = ipm_performance_bound(pair, w, kappa_ol, transform, kind, variant)
                _check_report(result, f"Thm5.{variant}[{kind.kind}]", report, instance)
                if variant == "part4_hatV":
                    result.record("Thm5.part4 >= Thm4.part1", report.bound >= openloop_hat.bound - SLACK,
                                  (instance, report.bound, openloop_hat.bound))

    # mismatch orderings and distance-based upper bounds
    for v in (pair.v_hat_star, pair.v_star, rng.normal(0.0, 10.0, size=n_s)):
        d_max = mismatch_max(pair, v, w, transform).value
        d_opt = mismatch_optimal(pair, v, w, transform).value
        d_pol = mismatch_policy(pair, pi_hat, v, w, transform).value
        result.record("Delta* <= Delta_max", d_opt <= d_max + SLACK, (instance, d_opt, d_max))
        result.record("Delta^pi <= Delta_max", d_pol <= d_max + SLACK, (instance, d_pol, d_max))
        for kind in kinds:
            rho = minkowski(v, kind, m.labels)
            dist = model_distance(pair, w, transform, kind)
            upper = mismatch_from_distance(dist, rho, gamma)
            result.record(f"Lem7.max[{kind.kind}]", d_max <= upper + SLACK * max(1.0, upper),
                          (instance, d_max, upper))
            pair_value = mismatch_policy_pair(pair, pi, pi_hat, v, w, transform).value
            dist_pp = model_distance(pair, w, transform, kind, pi, pi_hat)
            upper_pp = mismatch_from_distance(dist_pp, rho, gamma)
            result.record(f"Lem7.pair[{kind.kind}]", pair_value <= upper_pp + SLACK * max(1.0, upper_pp),
                          (instance, pair_value, upper_pp))


def duality_checks(rng: np.random.Generator, result: SuiteResult, samples: int = 1000) -> None:
    """``|f.p - f.q| <= rho(f) d(p, q)`` on random triples, per IPM kind."""
    for kind_name in ("total_variation", "wasserstein", "wasserstein_metric", "weighted_tv"):
        for _ in range(samples):
            n = int(rng.integers(2, 9))
            p, q = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
            f = rng.normal(0.0, 5.0, size=n)
            labels = np.sort(rng.uniform(-5.0, 5.0, size=n))
            if kind_name == "total_variation":
                kind = IpmKind.total_variation()
            elif kind_name == "wasserstein":
                kind = IpmKind.wasserstein()
            elif kind_name == "wasserstein_metric":
                kind = IpmKind.wasserstein(random_metric(rng, n))
            else:
                kind = IpmKind.weighted_tv(rng.uniform(1.0, 5.0, size=n))
            lhs = abs(f @ (p - q))
            rhs = minkowski(f, kind, labels) * ipm_distance(p, q, kind, labels)
            result.record(f"duality[{kind_name}]", lhs <= rhs + 1e-10 * max(1.0, rhs), (lhs, rhs))


def run_random_suite(instances: int = 200, seed: int = 0, duality_samples: int = 1000) -> SuiteResult:
    rng = np.random.default_rng(seed)
    result = SuiteResult()
    for i in range(instances):
        pair = random_pair(rng)
        w = WeightFn(rng.uniform(1.0, 5.0, size=pair.n_states))
        check_instance(pair, w, rng, result, i, general_metric=(i % 10 == 0))
        result.instances += 1
    duality_checks(rng, result, duality_samples)
    return result


def random_lqr_pair(rng: np.random.Generator, n_s: int, n_a: int, discount: float = 0.9):
    a = rng.normal(0.0, 0.6, size=(n_s, n_s))
    b = rng.normal(0.0, 1.0, size=(n_s, n_a))
    root_q = rng.normal(0.0, 1.0, size=(n_s, n_s))
    q = root_q @ root_q.T + 0.1 * np.eye(n_s)
    r = np.diag(rng.uniform(0.2, 2.0, size=n_a))
    sigma = np.diag(rng.uniform(0.0, 1.0, size=n_s))
    m = LqrModel(a, b, q, r, sigma, discount)
    m_hat = LqrModel(a + rng.normal(0.0, 0.1, size=a.shape), b + rng.normal(0.0, 0.1, size=b.shape),
                     q, r, sigma * rng.uniform(0.0, 2.0), discount)
    return m, m_hat


def run_lqr_suite(pairs: int = 100, seed: int = 0, ell: float = 0.02, max_draws: int = 10_000) -> SuiteResult:
    """Closed-form LQR bound against the exact weighted gap on random certified pairs."""
    rng = np.random.default_rng(seed)
    result = SuiteResult()
    draws = 0
    while result.instances < pairs and draws < max_draws:
        draws += 1
        n_s = 1 if result.instances % 2 == 0 else 2
        n_a = 1 if n_s == 1 else int(rng.integers(1, 3))
        try:
            m, m_hat = random_lqr_pair(rng, n_s, n_a)
            report = lqr_performance_bound(m, m_hat, ell)
        except (ValueError, ConvergenceError):
            continue
        if not report.certified:
            continue
        gap = realized_gap(m, m_hat, ell, report.cert.solution, report.cert.solution_hat)
        result.record(f"Prop1[{n_s}d]", gap <= report.bound + SLACK, (result.instances, gap, report.bound))
        result.instances += 1
    return result
