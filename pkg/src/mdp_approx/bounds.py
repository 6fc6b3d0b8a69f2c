"""Performance-loss bounds for deploying the approximate model's optimal policy.

Every bound is returned as a :class:`BoundReport`.  When the stability
assumptions a bound relies on cannot be certified the bound is still
computed, but the report is flagged as uncertified.  With ``gamma * kappa >= 1``
no finite bound exists and ``bound`` is ``inf``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .mdp import IDENTITY, AffineTransform, InvalidInputError, Policy, policy_evaluation
from .mismatch import (
    ModelPair,
    mismatch_max,
    mismatch_optimal,
    mismatch_policy,
    mismatch_policy_pair,
)
from .weighting import (
    AssumptionReport,
    StabilityCert,
    WeightFn,
    as_weight,
    check_assumptions,
    kappa_policy,
    weighted_norm,
)

PERFORMANCE_VARIANTS = ("part1_hatV", "part1_V", "part2", "part3")
VALUE_VARIANTS = ("pair_hatV", "pair_V", "opt_hatV", "opt_V")


@dataclass(frozen=True, eq=False)
class BoundReport:
    theorem: str
    bound: float
    terms: dict
    cert: StabilityCert
    transform: AffineTransform
    required: tuple
    certified: bool
    assumptions: Optional[AssumptionReport] = None
    realized: Optional[float] = None
    notes: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        return "certified" if self.certified else "uncertified"

    @property
    def weight(self) -> WeightFn:
        return self.cert.weight


@dataclass(frozen=True, eq=False)
class ValueEnvelope:
    upper: np.ndarray
    lower: np.ndarray
    best_member: Optional[np.ndarray] = None  # index of the tightest family member per state

    def contains(self, v, atol: float = 0.0) -> bool:
        v = np.asarray(v)
        return bool(np.all(self.lower - atol <= v) and np.all(v <= self.upper + atol))


def _scale(gamma: float, kappa: float) -> float:
    """``1 / (1 - gamma kappa)``, or inf when the contraction fails."""
    gk = gamma * kappa
    return math.inf if gk >= 1.0 else 1.0 / (1.0 - gk)


def _alpha_assumptions(transform: AffineTransform) -> tuple[int, int]:
    # with the identity transform the alpha variants coincide with the plain ones
    return (3, 4) if transform.is_identity else (6, 7)


def _report(theorem, bound, terms, pair, w, kappa, transform, required, realized=None,
            extra_certified=True, notes=None) -> BoundReport:
    cert = StabilityCert(kappa, w, pair.discount, "supplied")
    assumptions = check_assumptions(pair, w, kappa, transform, which=required) if required else None
    certified = cert.valid and extra_certified and (assumptions is None or assumptions.holds(*required))
    return BoundReport(theorem, bound, terms, cert, transform, tuple(required), certified,
                       assumptions, realized, notes or {})


def _realized_gap(pair: ModelPair, w: WeightFn) -> float:
    return weighted_norm(pair.v_pihat - pair.v_star, w)


def policy_error_bound(pair: ModelPair, pi: Policy, pi_hat: Policy, w, kappa: float,
                       transform: AffineTransform = IDENTITY, oracle: bool = True) -> BoundReport:
    """Bound on ``||V^pi_alpha - V_hat^pi_hat||_w`` for a policy of each model."""
    w = as_weight(w)
    m, m_hat = pair.m, pair.m_hat
    v_pi = policy_evaluation(m, pi, pair.tol, pair.max_iter, transform)
    v_hat_pi = policy_evaluation(m_hat, pi_hat, pair.tol, pair.max_iter)
    d_true = mismatch_policy_pair(pair, pi, pi_hat, v_pi, w, transform).value
    d_hat = mismatch_policy_pair(pair, pi, pi_hat, v_hat_pi, w, transform).value
    bound = min(d_true, d_hat) * _scale(pair.discount, kappa)
    stable = (kappa_policy(m, pi, w).kappa <= kappa * (1 + 1e-12)
              and kappa_policy(m_hat, pi_hat, w).kappa <= kappa * (1 + 1e-12))
    realized = weighted_norm(v_pi - v_hat_pi, w) if oracle else None
    terms = {"mismatch(V_pi)": d_true, "mismatch(V_hat_pi_hat)": d_hat}
    return _report("Lem2", bound, terms, pair, w, kappa, transform, (), realized, stable)


def value_error_bound(pair: ModelPair, w, kappa: float, variant: str = "opt_hatV",
                      transform: AffineTransform = IDENTITY, oracle: bool = True) -> BoundReport:
    """Bound on ``||V*_alpha - V_hat*||_w``; identity transform gives the plain value error."""
    if variant not in VALUE_VARIANTS:
        raise InvalidInputError(f"unknown variant {variant!r}; expected one of {VALUE_VARIANTS}")
    w = as_weight(w)
    scale = _scale(pair.discount, kappa)
    n1, n2 = _alpha_assumptions(transform)
    if variant == "pair_hatV":
        term = mismatch_policy_pair(pair, pair.pi_star, pair.pi_hat_star, pair.v_hat_star, w, transform)
        required = (2,)
    elif variant == "pair_V":
        term = mismatch_policy_pair(pair, pair.pi_star, pair.pi_hat_star, pair.v_star_alpha(transform), w, transform)
        required = (2,)
    elif variant == "opt_hatV":
        term = mismatch_optimal(pair, pair.v_hat_star, w, transform)
        required = (2, n1)
    else:
        term = mismatch_optimal(pair, pair.v_star_alpha(transform), w, transform)
        required = (2, n2)
    realized = weighted_norm(pair.v_star_alpha(transform) - pair.v_hat_star, w) if oracle else None
    return _report(f"Lem3.{variant}", term.value * scale, {variant: term.value}, pair, w, kappa,
                   transform, required, realized)


def _theorem_name(base: int, transform: AffineTransform, part: str) -> str:
    # base 1 -> 1 or 3, base 2 -> 2 or 4 depending on whether costs are transformed
    number = base if transform.is_identity else base + 2
    return f"Thm{number}.{part}"


def performance_loss_bound(pair: ModelPair, w, kappa: float, transform: AffineTransform = IDENTITY,
                           variant: str = "part2", oracle: bool = True) -> BoundReport:
    """Bound on ``||V^{pi_hat*} - V*||_w`` from exact mismatch functionals."""
    if variant not in PERFORMANCE_VARIANTS:
        raise InvalidInputError(f"unknown variant {variant!r}; expected one of {PERFORMANCE_VARIANTS}")
    w = as_weight(w)
    gamma, a1 = pair.discount, transform.alpha1
    scale = _scale(gamma, kappa)
    gk = gamma * kappa
    outer = math.inf if gk >= 1 else (1.0 + gk) / (1.0 - gk) ** 2
    pi_hat = pair.pi_hat_star
    n1, n2 = _alpha_assumptions(transform)

    if variant == "part1_hatV":
        v = pair.v_hat_star
        d_pol = mismatch_policy(pair, pi_hat, v, w, transform).value
        d_pair = mismatch_policy_pair(pair, pair.pi_star, pi_hat, v, w, transform).value
        terms = {"mismatch_pihat(V_hat)": d_pol, "mismatch_pair(V_hat)": d_pair}
        bound = (d_pol + d_pair) * scale / a1
        required, part = (2,), "1(hatV)"
    elif variant == "part1_V":
        v = a1 * pair.v_star
        d_pol = mismatch_policy(pair, pi_hat, v, w, transform).value
        d_pair = mismatch_policy_pair(pair, pair.pi_star, pi_hat, v, w, transform).value
        terms = {"mismatch_pihat(a1 V)": d_pol, "mismatch_pair(a1 V)": d_pair}
        bound = (d_pol * scale + d_pair * outer) / a1
        required, part = (2,), "1(V)"
    elif variant == "part2":
        v = pair.v_hat_star
        d_pol = mismatch_policy(pair, pi_hat, v, w, transform).value
        d_opt = mismatch_optimal(pair, v, w, transform).value
        terms = {"mismatch_pihat(V_hat)": d_pol, "mismatch_opt(V_hat)": d_opt}
        bound = (d_pol + d_opt) * scale / a1
        required, part = (2, n1), "2"
    else:
        v = a1 * pair.v_star
        d_pol = mismatch_policy(pair, pi_hat, v, w, transform).value
        d_opt = mismatch_optimal(pair, v, w, transform).value
        terms = {"mismatch_pihat(a1 V)": d_pol, "mismatch_opt(a1 V)": d_opt}
        bound = (d_pol * scale + d_opt * outer) / a1
        required, part = (2, n2), "3"

    realized = _realized_gap(pair, w) if oracle else None
    return _report(_theorem_name(1, transform, part), bound, terms, pair, w, kappa, transform,
                   required, realized)


def openloop_bound(pair: ModelPair, w, kappa: float, transform: AffineTransform = IDENTITY,
                   use: str = "hatV", oracle: bool = True) -> BoundReport:
    """Bound through the maximum mismatch over constant-action policies."""
    w = as_weight(w)
    gamma, a1 = pair.discount, transform.alpha1
    scale = _scale(gamma, kappa)
    if use == "hatV":
        d_max = mismatch_max(pair, pair.v_hat_star, w, transform).value
        bound, part = 2.0 * d_max * scale / a1, "1"
    elif use == "V":
        d_max = mismatch_max(pair, a1 * pair.v_star, w, transform).value
        bound, part = 2.0 * d_max * scale ** 2 / a1, "2"
    else:
        raise InvalidInputError("use must be 'hatV' or 'V'")
    realized = _realized_gap(pair, w) if oracle else None
    return _report(_theorem_name(2, transform, part), bound, {"mismatch_max": d_max}, pair, w,
                   kappa, transform, (2, 5), realized)


def envelope(pair: ModelPair, report: BoundReport) -> ValueEnvelope:
    """Per-state interval ``[V^{pi_hat*} - bound * w, V^{pi_hat*}]`` that contains V*."""
    upper = pair.v_pihat
    return ValueEnvelope(upper, upper - report.bound * report.weight.weights)


def best_envelope_over_weights(pair: ModelPair, family: Sequence, variant: str = "part2",
                               transform: AffineTransform = IDENTITY) -> ValueEnvelope:
    """Tightest lower envelope over a family of ``(weight, kappa)`` pairs, state by state.

    Members whose assumptions cannot be certified are skipped with a warning.
    """
    upper = pair.v_pihat
    gaps, members = [], []
    for index, (w, kappa) in enumerate(family):
        report = performance_loss_bound(pair, w, kappa, transform, variant, oracle=False)
        if not report.certified:
            warnings.warn(f"weight family member {index} is not certified; skipped", stacklevel=2)
            continue
        gaps.append(report.bound * report.weight.weights)
        members.append(index)
    if not gaps:
        raise InvalidInputError("no member of the weight family is certified")
    gaps = np.vstack(gaps)
    best = np.argmin(gaps, axis=0)
    return ValueEnvelope(upper, upper - gaps[best, np.arange(len(upper))], np.asarray(members)[best])


def best_bound_over_transforms(pair: ModelPair, w, kappa: float,
                               grid: Sequence[AffineTransform], oracle: bool = True) -> BoundReport:
    """Smallest certified cost-transformed bound (part 2) over a grid of transforms.

    If no grid point certifies, the smallest uncertified bound is returned flagged.
    """
    if not grid:
        raise InvalidInputError("transform grid is empty")
    reports = [performance_loss_bound(pair, w, kappa, t, "part2", oracle) for t in grid]
    certified = [r for r in reports if r.certified]
    return min(certified or reports, key=lambda r: r.bound)


def witness_kappa(pair: ModelPair, w, transform: AffineTransform = IDENTITY,
                  assumptions=(2, 3)) -> float:
    """Largest kappa achieved by the witness policies of the given assumptions.

    This is the smallest kappa for which those assumptions can be certified.
    """
    report = check_assumptions(pair, w, 1.0, transform, which=assumptions)
    return report.kappa_needed(*assumptions)
