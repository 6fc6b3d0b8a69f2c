"""Weight functions, weighted norms and (kappa, w) stability certificates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from .mdp import IDENTITY, AffineTransform, FiniteMdp, InvalidInputError, Policy, induced

if TYPE_CHECKING:
    from .mismatch import ModelPair

# gamma * kappa must stay below 1 - VALIDITY_MARGIN for a certificate to count
VALIDITY_MARGIN = 1e-12
# relative slack when comparing an achieved kappa against a supplied one
KAPPA_RTOL = 1e-12

ALL_ASSUMPTIONS = (2, 3, 4, 5, 6, 7)


@dataclass(frozen=True, eq=False)
class WeightFn:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1:
            raise InvalidInputError("weights must be a 1-d array")
        if not np.all(np.isfinite(w)) or w.min(initial=1.0) < 1.0:
            raise InvalidInputError("weights must be finite and at least 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def ones(cls, n: int) -> "WeightFn":
        return cls(np.ones(n))

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == 1.0))


def as_weight(w) -> WeightFn:
    return w if isinstance(w, WeightFn) else WeightFn(w)


def is_valid(gamma: float, kappa: float) -> bool:
    return kappa > 0 and gamma * kappa < 1.0 - VALIDITY_MARGIN


@dataclass(frozen=True, eq=False)
class StabilityCert:
    kappa: float
    weight: WeightFn
    discount: float
    scope: str  # "policy", "model" or "supplied"
    policy: Optional[Policy] = None
    cost_norm: float = 0.0  # ||c_pi||_w for a policy, c_max for a model
    gamma_kappa: float = field(init=False)
    valid: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "gamma_kappa", self.discount * self.kappa)
        object.__setattr__(self, "valid", is_valid(self.discount, self.kappa))


def weighted_norm(v, w) -> float:
    v = np.asarray(v, dtype=float)
    w = as_weight(w).weights
    if v.shape != w.shape:
        raise InvalidInputError(f"length mismatch: {v.shape} vs {w.shape}")
    return float(np.max(np.abs(v) / w))


def _check_weight(mdp: FiniteMdp, w: WeightFn) -> None:
    if len(w) != mdp.n_states:
        raise InvalidInputError("weight length does not match the number of states")


def kappa_policy(mdp: FiniteMdp, policy: Policy, w) -> StabilityCert:
    """Smallest kappa with ``sum_s' w(s') P_pi(s'|s) <= kappa w(s)`` for every s."""
    w = as_weight(w)
    _check_weight(mdp, w)
    c_pi, p_pi = induced(mdp, policy)
    kappa = float(np.max((p_pi @ w.weights) / w.weights))
    return StabilityCert(kappa, w, mdp.discount, "policy", policy, weighted_norm(c_pi, w))


def kappa_model(mdp: FiniteMdp, w) -> StabilityCert:
    """Smallest kappa bar satisfying the drift condition uniformly over actions."""
    w = as_weight(w)
    _check_weight(mdp, w)
    ratios = mdp.expected(w.weights) / w.weights[:, None]
    c_max = float(np.max(np.abs(mdp.cost) / w.weights[:, None]))
    return StabilityCert(float(ratios.max()), w, mdp.discount, "model", None, c_max)


def open_loop_kappas(mdp: FiniteMdp, w) -> np.ndarray:
    """kappa of every constant-action policy, one entry per action."""
    w = as_weight(w)
    _check_weight(mdp, w)
    return np.max(mdp.expected(w.weights) / w.weights[:, None], axis=0)


@dataclass(frozen=True, eq=False)
class AssumptionStatus:
    certified: bool
    witnesses: dict  # role -> Policy
    kappas: dict  # role -> achieved kappa

    @property
    def kappa(self) -> float:
        return max(self.kappas.values())


@dataclass(frozen=True, eq=False)
class AssumptionReport:
    kappa: float
    weight: WeightFn
    transform: AffineTransform
    statuses: dict  # assumption number -> AssumptionStatus
    gamma_kappa_valid: bool

    def holds(self, *numbers: int) -> bool:
        return all(self.statuses[n].certified for n in numbers)

    def kappa_needed(self, *numbers: int) -> float:
        """Largest kappa achieved by the witnesses of the given assumptions."""
        return max(self.statuses[n].kappa for n in numbers)


def check_assumptions(pair: "ModelPair", w, kappa: float, transform: AffineTransform = IDENTITY,
                      which=ALL_ASSUMPTIONS) -> AssumptionReport:
    """Certify the stability assumptions constructively.

    Each set in an assumption is witnessed by the deterministic greedy policy
    with smallest-index tie-breaking; if the witness fails the kappa test the
    assumption is reported as not certified (which is not the same as false).
    The open-loop assumption checks every constant-action policy in both models.
    """
    w = as_weight(w)
    m, m_hat = pair.m, pair.m_hat
    limit = kappa * (1.0 + KAPPA_RTOL)
    valid = is_valid(m.discount, kappa)

    def policy_status(entries):
        witnesses, kappas = {}, {}
        for role, model, policy in entries:
            witnesses[role] = policy
            kappas[role] = kappa_policy(model, policy, w).kappa
        return AssumptionStatus(valid and all(k <= limit for k in kappas.values()), witnesses, kappas)

    statuses = {}
    for n in which:
        if n == 2:
            statuses[2] = policy_status([
                ("pi_star in M", m, pair.pi_star),
                ("pi_hat_star in M", m, pair.pi_hat_star),
                ("pi_hat_star in M_hat", m_hat, pair.pi_hat_star),
            ])
        elif n == 3:
            statuses[3] = policy_status([("mu_star in M", m, pair.mu_star(IDENTITY))])
        elif n == 4:
            statuses[4] = policy_status([("mu_hat_star in M_hat", m_hat, pair.mu_hat_star(IDENTITY))])
        elif n == 5:
            kappas = {
                "open loop in M": float(open_loop_kappas(m, w).max()),
                "open loop in M_hat": float(open_loop_kappas(m_hat, w).max()),
            }
            statuses[5] = AssumptionStatus(valid and all(k <= limit for k in kappas.values()), {}, kappas)
        elif n == 6:
            statuses[6] = policy_status([("mu_star_alpha in M", m, pair.mu_star(transform))])
        elif n == 7:
            statuses[7] = policy_status([("mu_hat_star_alpha in M_hat", m_hat, pair.mu_hat_star(transform))])
        else:
            raise InvalidInputError(f"unknown assumption {n}")
    return AssumptionReport(kappa, w, transform, statuses, valid)
