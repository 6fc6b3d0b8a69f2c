"""Tabular MDPs, Bellman operators and the basic solvers.

Transition kernels are stored as a sparse ``(n_states * n_actions, n_states)``
matrix whose row ``s * n_actions + a`` is ``P(. | s, a)``.  Small random
models are built from a dense array with :meth:`FiniteMdp.from_dense`; the
inventory model uses :meth:`FiniteMdp.from_outcomes` so that only the few
reachable next states of each row are stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse

ROW_TOL = 1e-12
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000


class InvalidInputError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AffineTransform:
    """Cost map ``c -> alpha1 * c + alpha2``."""

    alpha1: float = 1.0
    alpha2: float = 0.0

    def __post_init__(self):
        if not self.alpha1 > 0:
            raise InvalidInputError(f"alpha1 must be positive, got {self.alpha1}")

    @property
    def is_identity(self) -> bool:
        return self.alpha1 == 1.0 and self.alpha2 == 0.0

    def apply(self, c):
        return self.alpha1 * c + self.alpha2


IDENTITY = AffineTransform(1.0, 0.0)


@dataclass(frozen=True, eq=False)
class FiniteMdp:
    kernel: sparse.csr_matrix
    cost: np.ndarray
    discount: float
    state_labels: Optional[np.ndarray] = None
    c_min: float = field(init=False)

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=float)
        if cost.ndim != 2:
            raise InvalidInputError("cost must be an (n_states, n_actions) array")
        n_s, n_a = cost.shape
        if n_s < 1 or n_a < 1:
            raise InvalidInputError("need at least one state and one action")
        if not np.all(np.isfinite(cost)):
            raise InvalidInputError("cost entries must be finite")
        if not 0.0 < self.discount < 1.0:
            raise InvalidInputError(f"discount must lie in (0, 1), got {self.discount}")

        kernel = sparse.csr_matrix(self.kernel, dtype=float)
        kernel.sum_duplicates()
        if kernel.shape != (n_s * n_a, n_s):
            raise InvalidInputError(
                f"kernel shape {kernel.shape} does not match {(n_s * n_a, n_s)}"
            )
        if kernel.nnz and kernel.data.min() < 0:
            raise InvalidInputError("transition probabilities must be nonnegative")
        sums = np.asarray(kernel.sum(axis=1)).ravel()
        if np.max(np.abs(sums - 1.0)) > ROW_TOL:
            raise InvalidInputError("every transition row must sum to one")

        labels = self.state_labels
        if labels is not None:
            labels = np.asarray(labels)
            if labels.shape != (n_s,):
                raise InvalidInputError("state_labels must have one entry per state")
            labels = _frozen(labels)

        kernel.data.setflags(write=False)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "cost", _frozen(cost))
        object.__setattr__(self, "discount", float(self.discount))
        object.__setattr__(self, "state_labels", labels)
        object.__setattr__(self, "c_min", float(cost.min()))

    @classmethod
    def from_dense(cls, transition, cost, discount, state_labels=None) -> "FiniteMdp":
        transition = np.asarray(transition, dtype=float)
        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise InvalidInputError("transition must have shape (n_states, n_actions, n_states)")
        n_s, n_a, _ = transition.shape
        return cls(sparse.csr_matrix(transition.reshape(n_s * n_a, n_s)), cost, discount, state_labels)

    @classmethod
    def from_outcomes(cls, next_states, probs, cost, discount, state_labels=None) -> "FiniteMdp":
        """Build from ``(n_states, n_actions, k)`` arrays of successor indices and masses.

        Repeated successors within a row are merged.
        """
        next_states = np.asarray(next_states)
        probs = np.asarray(probs, dtype=float)
        if next_states.shape != probs.shape or next_states.ndim != 3:
            raise InvalidInputError("next_states and probs must share a 3-d shape")
        n_s, n_a, k = next_states.shape
        rows = np.repeat(np.arange(n_s * n_a), k)
        kernel = sparse.coo_matrix(
            (probs.ravel(), (rows, next_states.ravel())), shape=(n_s * n_a, n_s)
        ).tocsr()
        return cls(kernel, cost, discount, state_labels)

    @property
    def n_states(self) -> int:
        return self.cost.shape[0]

    @property
    def n_actions(self) -> int:
        return self.cost.shape[1]

    @property
    def labels(self) -> np.ndarray:
        if self.state_labels is None:
            return np.arange(self.n_states)
        return self.state_labels

    @property
    def transition(self) -> np.ndarray:
        """Dense ``(n_states, n_actions, n_states)`` kernel; meant for small models."""
        return self.kernel.toarray().reshape(self.n_states, self.n_actions, self.n_states)

    def rows(self, s: int) -> np.ndarray:
        """Dense ``(n_actions, n_states)`` block of next-state laws at state ``s``."""
        a = self.n_actions
        return self.kernel[s * a:(s + 1) * a].toarray()

    def expected(self, v) -> np.ndarray:
        """``E[v(S') | s, a]`` for every pair, shape ``(n_states, n_actions)``."""
        v = self._check_values(v)
        return (self.kernel @ v).reshape(self.n_states, self.n_actions)

    def transformed(self, transform: AffineTransform) -> "FiniteMdp":
        """The model with the same dynamics and cost ``alpha1 * c + alpha2``."""
        return FiniteMdp(self.kernel, transform.apply(self.cost), self.discount, self.state_labels)

    def _check_values(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n_states,):
            raise InvalidInputError(f"value function has shape {v.shape}, expected ({self.n_states},)")
        return v


@dataclass(frozen=True, eq=False)
class Policy:
    """Deterministic (``actions``) or stochastic (``probs``) stationary policy."""

    actions: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.actions is None) == (self.probs is None):
            raise InvalidInputError("give exactly one of actions or probs")
        if self.actions is not None:
            actions = np.asarray(self.actions)
            if actions.ndim != 1 or not np.issubdtype(actions.dtype, np.integer):
                raise InvalidInputError("deterministic actions must be a 1-d integer array")
            if actions.size and actions.min() < 0:
                raise InvalidInputError("action indices must be nonnegative")
            object.__setattr__(self, "actions", _frozen(actions))
        else:
            probs = np.asarray(self.probs, dtype=float)
            if probs.ndim != 2:
                raise InvalidInputError("stochastic policy must be an (n_states, n_actions) array")
            if probs.min() < 0 or np.max(np.abs(probs.sum(axis=1) - 1.0)) > ROW_TOL:
                raise InvalidInputError("policy rows must be probability vectors")
            object.__setattr__(self, "probs", _frozen(probs))

    @classmethod
    def deterministic(cls, actions) -> "Policy":
        return cls(actions=np.asarray(actions, dtype=np.int64))

    @classmethod
    def stochastic(cls, probs) -> "Policy":
        return cls(probs=probs)

    @classmethod
    def constant(cls, action: int, n_states: int) -> "Policy":
        """The open-loop policy that always plays ``action``."""
        return cls.deterministic(np.full(n_states, action, dtype=np.int64))

    @property
    def kind(self) -> str:
        return "deterministic" if self.actions is not None else "stochastic"

    @property
    def n_states(self) -> int:
        return len(self.actions) if self.actions is not None else self.probs.shape[0]

    def matrix(self, n_actions: int) -> np.ndarray:
        if self.probs is not None:
            return self.probs
        out = np.zeros((self.n_states, n_actions))
        out[np.arange(self.n_states), self.actions] = 1.0
        return out

    def check(self, mdp: FiniteMdp) -> None:
        if self.n_states != mdp.n_states:
            raise InvalidInputError("policy and model disagree on the number of states")
        if self.actions is not None and self.actions.max(initial=0) >= mdp.n_actions:
            raise InvalidInputError("action index out of range")
        if self.probs is not None and self.probs.shape[1] != mdp.n_actions:
            raise InvalidInputError("policy and model disagree on the number of actions")

    def __eq__(self, other):
        if not isinstance(other, Policy):
            return NotImplemented
        if self.actions is not None and other.actions is not None:
            return np.array_equal(self.actions, other.actions)
        n_a = max(self._width(), other._width())
        a, b = self.matrix(n_a), other.matrix(n_a)
        return a.shape == b.shape and np.array_equal(a, b)

    __hash__ = None

    def _width(self) -> int:
        if self.probs is not None:
            return self.probs.shape[1]
        return int(self.actions.max(initial=0)) + 1


def _selector(mdp: FiniteMdp, policy: Policy) -> sparse.csr_matrix:
    n_s, n_a = mdp.n_states, mdp.n_actions
    if policy.actions is not None:
        cols = np.arange(n_s) * n_a + policy.actions
        return sparse.csr_matrix((np.ones(n_s), (np.arange(n_s), cols)), shape=(n_s, n_s * n_a))
    probs = policy.probs
    rows = np.repeat(np.arange(n_s), n_a)
    cols = np.arange(n_s * n_a)
    return sparse.csr_matrix((probs.ravel(), (rows, cols)), shape=(n_s, n_s * n_a))


def induced(mdp: FiniteMdp, policy: Policy) -> tuple[np.ndarray, sparse.csr_matrix]:
    """Per-state cost ``c_pi`` and state kernel ``P_pi`` of a policy."""
    policy.check(mdp)
    if policy.actions is not None:
        c_pi = mdp.cost[np.arange(mdp.n_states), policy.actions]
    else:
        c_pi = np.sum(policy.probs * mdp.cost, axis=1)
    return c_pi, (_selector(mdp, policy) @ mdp.kernel).tocsr()


def q_values(mdp: FiniteMdp, v, transform: AffineTransform = IDENTITY) -> np.ndarray:
    return transform.apply(mdp.cost) + mdp.discount * mdp.expected(v)


def bellman_policy(mdp: FiniteMdp, policy: Policy, v, transform: AffineTransform = IDENTITY) -> np.ndarray:
    v = mdp._check_values(v)
    c_pi, p_pi = induced(mdp, policy)
    return transform.apply(c_pi) + mdp.discount * (p_pi @ v)


def bellman_optimal(mdp: FiniteMdp, v, transform: AffineTransform = IDENTITY) -> tuple[np.ndarray, Policy]:
    """Minimising backup and its greedy policy (ties go to the smallest action index)."""
    q = q_values(mdp, v, transform)
    actions = np.argmin(q, axis=1)
    return q[np.arange(mdp.n_states), actions], Policy.deterministic(actions)


def greedy(mdp: FiniteMdp, v, transform: AffineTransform = IDENTITY) -> Policy:
    return bellman_optimal(mdp, v, transform)[1]


def _stop_threshold(tol: float, gamma: float) -> float:
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    return tol * (1.0 - gamma) / gamma


def value_iteration(mdp: FiniteMdp, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                    v0=None) -> tuple[np.ndarray, Policy]:
    """Iterate the optimality backup until successive iterates are within
    ``tol * (1 - gamma) / gamma`` in sup-norm, which guarantees the returned
    values are within ``tol`` of the optimum.
    """
    threshold = _stop_threshold(tol, mdp.discount)
    v = np.zeros(mdp.n_states) if v0 is None else mdp._check_values(v0).copy()
    cost, gamma, kernel = mdp.cost, mdp.discount, mdp.kernel
    shape = (mdp.n_states, mdp.n_actions)
    residual = np.inf
    for _ in range(max_iter):
        v_new = np.min(cost + gamma * (kernel @ v).reshape(shape), axis=1)
        residual = np.max(np.abs(v_new - v))
        v = v_new
        if residual <= threshold:
            return v, greedy(mdp, v)
    raise ConvergenceError("value iteration did not converge", residual)


def policy_evaluation(mdp: FiniteMdp, policy: Policy, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER, transform: AffineTransform = IDENTITY) -> np.ndarray:
    threshold = _stop_threshold(tol, mdp.discount)
    c_pi, p_pi = induced(mdp, policy)
    c_pi = transform.apply(c_pi)
    gamma = mdp.discount
    v = np.zeros(mdp.n_states)
    residual = np.inf
    for _ in range(max_iter):
        v_new = c_pi + gamma * (p_pi @ v)
        residual = np.max(np.abs(v_new - v))
        v = v_new
        if residual <= threshold:
            return v
    raise ConvergenceError("policy evaluation did not converge", residual)
