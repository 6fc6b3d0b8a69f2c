"""Bellman mismatch functionals between a true model and an approximate one."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .mdp import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    IDENTITY,
    AffineTransform,
    FiniteMdp,
    InvalidInputError,
    Policy,
    bellman_optimal,
    bellman_policy,
    greedy,
    policy_evaluation,
    value_iteration,
)
from .weighting import WeightFn, as_weight


@dataclass(frozen=True, eq=False)
class ModelPair:
    """A true model ``m`` and an approximation ``m_hat`` on the same spaces.

    Optimal values and policies of both models are solved lazily and cached.
    """

    m: FiniteMdp
    m_hat: FiniteMdp
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    _greedy_cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        m, m_hat = self.m, self.m_hat
        if (m.n_states, m.n_actions) != (m_hat.n_states, m_hat.n_actions):
            raise InvalidInputError("models must share state and action spaces")
        if m.discount != m_hat.discount:
            raise InvalidInputError("models must share the discount factor")

    @property
    def discount(self) -> float:
        return self.m.discount

    @property
    def n_states(self) -> int:
        return self.m.n_states

    @cached_property
    def _hat_solution(self):
        return value_iteration(self.m_hat, self.tol, self.max_iter)

    @cached_property
    def _solution(self):
        return value_iteration(self.m, self.tol, self.max_iter)

    @property
    def v_hat_star(self) -> np.ndarray:
        return self._hat_solution[0]

    @property
    def pi_hat_star(self) -> Policy:
        return self._hat_solution[1]

    @property
    def v_star(self) -> np.ndarray:
        return self._solution[0]

    @property
    def pi_star(self) -> Policy:
        return self._solution[1]

    @cached_property
    def v_pihat(self) -> np.ndarray:
        """Value of the approximate model's optimal policy when run in ``m``."""
        return policy_evaluation(self.m, self.pi_hat_star, self.tol, self.max_iter)

    def v_star_alpha(self, transform: AffineTransform) -> np.ndarray:
        gamma = self.discount
        return transform.alpha1 * self.v_star + transform.alpha2 / (1.0 - gamma)

    def mu_star(self, transform: AffineTransform = IDENTITY) -> Policy:
        """Greedy policy of the transformed true model w.r.t. the approximate optimal value."""
        key = ("mu", transform)
        if key not in self._greedy_cache:
            self._greedy_cache[key] = greedy(self.m, self.v_hat_star, transform)
        return self._greedy_cache[key]

    def mu_hat_star(self, transform: AffineTransform = IDENTITY) -> Policy:
        """Greedy policy of the approximate model w.r.t. the transformed true optimal value."""
        key = ("mu_hat", transform)
        if key not in self._greedy_cache:
            self._greedy_cache[key] = greedy(self.m_hat, self.v_star_alpha(transform))
        return self._greedy_cache[key]


@dataclass(frozen=True, eq=False)
class MismatchValue:
    value: float
    kind: str  # "policy_pair", "policy", "optimality" or "max"
    transform: AffineTransform
    weight: WeightFn
    state: int  # maximising state
    action: Optional[int] = None  # maximising action, for "max"

    def __float__(self) -> float:
        return self.value


def _weighted_max(diff: np.ndarray, w: WeightFn) -> tuple[float, int]:
    if diff.shape != w.weights.shape:
        raise InvalidInputError("weight length does not match the number of states")
    ratio = np.abs(diff) / w.weights
    s = int(np.argmax(ratio))
    return float(ratio[s]), s


def mismatch_policy_pair(pair: ModelPair, pi: Policy, pi_hat: Policy, v, w,
                         transform: AffineTransform = IDENTITY) -> MismatchValue:
    w = as_weight(w)
    diff = bellman_policy(pair.m, pi, v, transform) - bellman_policy(pair.m_hat, pi_hat, v)
    value, s = _weighted_max(diff, w)
    return MismatchValue(value, "policy_pair", transform, w, s)


def mismatch_policy(pair: ModelPair, pi: Policy, v, w, transform: AffineTransform = IDENTITY) -> MismatchValue:
    out = mismatch_policy_pair(pair, pi, pi, v, w, transform)
    return MismatchValue(out.value, "policy", transform, out.weight, out.state)


def mismatch_optimal(pair: ModelPair, v, w, transform: AffineTransform = IDENTITY) -> MismatchValue:
    w = as_weight(w)
    diff = bellman_optimal(pair.m, v, transform)[0] - bellman_optimal(pair.m_hat, v)[0]
    value, s = _weighted_max(diff, w)
    return MismatchValue(value, "optimality", transform, w, s)


def xi(pair: ModelPair, v, transform: AffineTransform = IDENTITY) -> np.ndarray:
    """One-step backup difference for every state-action pair, shape ``(n_states, n_actions)``."""
    m, m_hat = pair.m, pair.m_hat
    return (transform.apply(m.cost) - m_hat.cost
            + m.discount * (m.expected(v) - m_hat.expected(v)))


def mismatch_max(pair: ModelPair, v, w, transform: AffineTransform = IDENTITY) -> MismatchValue:
    """Largest mismatch over open-loop policies, computed by a sweep over (s, a)."""
    w = as_weight(w)
    if len(w) != pair.n_states:
        raise InvalidInputError("weight length does not match the number of states")
    ratio = np.abs(xi(pair, v, transform)) / w.weights[:, None]
    s, a = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    return MismatchValue(float(ratio[s, a]), "max", transform, w, int(s), int(a))
