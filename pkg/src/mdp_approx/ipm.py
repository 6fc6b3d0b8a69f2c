"""Integral probability metrics, model distances and the distance-based bounds.

Three function classes are supported, each with its gauge ``rho``:

* total variation: ``rho(f) = span(f) / 2``, distance ``sum |p - q|``;
* Wasserstein (Kantorovich) for a metric on states: ``rho(f) = Lip(f)``;
* weighted total variation: ``rho(f) = max |f(s) - f(s')| / (w(s) + w(s'))``,
  distance ``sum w |p - q|``.

For every kind ``|f.p - f.q| <= rho(f) * d(p, q)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize, sparse

from .bounds import BoundReport, _alpha_assumptions, _report, _scale
from .mdp import IDENTITY, AffineTransform, FiniteMdp, InvalidInputError, Policy, induced
from .mismatch import ModelPair
from .weighting import WeightFn, as_weight, weighted_norm

KINDS = ("total_variation", "wasserstein", "weighted_tv")
METRIC_TOL = 1e-12
# metrics on more states than this get a sampled triangle-inequality check
FULL_TRIANGLE_CHECK = 200


@dataclass(frozen=True, eq=False)
class IpmKind:
    """Which IPM to use.  A Wasserstein kind without ``metric`` uses ``|label(s) - label(s')|``."""

    kind: str
    metric: Optional[np.ndarray] = None
    weight: Optional[WeightFn] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown IPM kind {self.kind!r}")
        if self.kind == "weighted_tv":
            if self.weight is None:
                raise InvalidInputError("weighted total variation needs a weight function")
            object.__setattr__(self, "weight", as_weight(self.weight))
        if self.metric is not None:
            if self.kind != "wasserstein":
                raise InvalidInputError("only the Wasserstein kind takes a metric")
            metric = np.array(self.metric, dtype=float)
            _check_metric(metric)
            metric.setflags(write=False)
            object.__setattr__(self, "metric", metric)

    @classmethod
    def total_variation(cls) -> "IpmKind":
        return cls("total_variation")

    @classmethod
    def wasserstein(cls, metric=None) -> "IpmKind":
        return cls("wasserstein", metric)

    @classmethod
    def weighted_tv(cls, w) -> "IpmKind":
        return cls("weighted_tv", weight=w)


def _check_metric(d: np.ndarray, seed: int = 0) -> None:
    n = d.shape[0]
    if d.ndim != 2 or d.shape != (n, n):
        raise InvalidInputError("metric must be a square matrix")
    if not np.all(np.isfinite(d)) or np.any(np.diag(d) != 0):
        raise InvalidInputError("metric must be finite with a zero diagonal")
    if np.max(np.abs(d - d.T)) > METRIC_TOL:
        raise InvalidInputError("metric must be symmetric")
    off = d[~np.eye(n, dtype=bool)]
    if off.size and off.min() <= 0:
        raise InvalidInputError("metric must be positive between distinct states")
    if n <= FULL_TRIANGLE_CHECK:
        slack = d[:, None, :] - d[:, :, None] - d.T[None, :, :]
    else:
        rng = np.random.default_rng(seed)
        i, j, k = rng.integers(n, size=(3, 100_000))
        slack = d[i, k] - d[i, j] - d[j, k]
    if slack.max() > METRIC_TOL * max(1.0, d.max()):
        raise InvalidInputError("metric violates the triangle inequality")


def _default_labels(n: int, labels) -> np.ndarray:
    labels = np.arange(n, dtype=float) if labels is None else np.asarray(labels, dtype=float)
    if labels.shape != (n,):
        raise InvalidInputError("need one label per state")
    return labels


def _check_distribution(p: np.ndarray) -> None:
    if p.min(initial=0.0) < -1e-15 or abs(p.sum() - 1.0) > 1e-9:
        raise InvalidInputError("not a probability distribution")


def transport_lp(p, q, metric) -> float:
    """Exact optimal-transport cost between ``p`` and ``q`` by linear programming."""
    p, q, metric = np.asarray(p, float), np.asarray(q, float), np.asarray(metric, float)
    n = len(p)
    rows = sparse.kron(sparse.eye(n), np.ones((1, n)))
    cols = sparse.kron(np.ones((1, n)), sparse.eye(n))
    a_eq = sparse.vstack([rows, cols]).tocsr()
    # rescale q so both marginals have exactly equal mass
    b_eq = np.concatenate([p, q * (p.sum() / q.sum())])
    res = optimize.linprog(metric.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def ipm_distance(p, q, ipm: IpmKind, labels=None) -> float:
    """IPM distance between two distributions over the same finite state set."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise InvalidInputError("p and q must be 1-d arrays of equal length")
    _check_distribution(p)
    _check_distribution(q)
    diff = p - q
    if ipm.kind == "total_variation":
        return float(np.abs(diff).sum())
    if ipm.kind == "weighted_tv":
        if len(ipm.weight) != len(p):
            raise InvalidInputError("weight length does not match the distributions")
        return float(np.abs(diff) @ ipm.weight.weights)
    if ipm.metric is not None:
        if ipm.metric.shape[0] != len(p):
            raise InvalidInputError("metric size does not match the distributions")
        return transport_lp(p, q, ipm.metric)
    x = _default_labels(len(p), labels)
    order = np.argsort(x, kind="stable")
    x, diff = x[order], diff[order]
    if np.any(np.diff(x) == 0):
        raise InvalidInputError("state labels must be distinct to define a metric")
    return float(np.abs(np.cumsum(diff)[:-1]) @ np.diff(x))


def _row_distances(k1: sparse.csr_matrix, k2: sparse.csr_matrix, ipm: IpmKind, labels) -> np.ndarray:
    """IPM distance between matching rows of two row-stochastic sparse matrices."""
    n_rows, n = k1.shape
    diff = (sparse.csr_matrix(k1) - sparse.csr_matrix(k2)).tocsr()
    if ipm.kind == "total_variation":
        return np.asarray(abs(diff).sum(axis=1)).ravel()
    if ipm.kind == "weighted_tv":
        if len(ipm.weight) != n:
            raise InvalidInputError("weight length does not match the number of states")
        return abs(diff) @ ipm.weight.weights
    if ipm.metric is not None:
        dense1, dense2 = k1.toarray(), k2.toarray()
        return np.array([transport_lp(dense1[i], dense2[i], ipm.metric) for i in range(n_rows)])

    x = _default_labels(n, labels)
    order = np.argsort(x, kind="stable")
    x = x[order]
    if np.any(np.diff(x) == 0):
        raise InvalidInputError("state labels must be distinct to define a metric")
    diff = diff[:, order].tocsr()
    diff.sort_indices()
    row = np.repeat(np.arange(n_rows), np.diff(diff.indptr))
    # CDF of the difference at each support point, row by row
    cum = np.cumsum(diff.data)
    start = np.concatenate([[0.0], cum])[diff.indptr[:-1]]
    cdf = cum - start[row]
    same_row = row[1:] == row[:-1]
    gaps = x[diff.indices[1:]] - x[diff.indices[:-1]]
    contrib = np.abs(cdf[:-1]) * gaps
    return np.bincount(row[:-1][same_row], weights=contrib[same_row], minlength=n_rows)


def minkowski(v, ipm: IpmKind, labels=None) -> float:
    """Gauge of ``v`` for the function class of ``ipm``."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise InvalidInputError("v must be 1-d")
    if ipm.kind == "total_variation":
        return float(v.max() - v.min()) / 2.0
    if ipm.kind == "weighted_tv":
        w = ipm.weight.weights
        if w.shape != v.shape:
            raise InvalidInputError("weight length does not match v")
        return _max_pairwise(v, lambda i: w[i, None] + w[None, :])
    if ipm.metric is not None:
        if ipm.metric.shape[0] != len(v):
            raise InvalidInputError("metric size does not match v")
        d = ipm.metric
        return _max_pairwise(v, lambda i: d[i])
    x = _default_labels(len(v), labels)
    order = np.argsort(x, kind="stable")
    gaps = np.diff(x[order])
    if np.any(gaps == 0):
        raise InvalidInputError("state labels must be distinct to define a metric")
    # on a line the Lipschitz constant is attained between neighbours
    return float(np.max(np.abs(np.diff(v[order])) / gaps, initial=0.0))


def _max_pairwise(v: np.ndarray, denominator, chunk: int = 512) -> float:
    best = 0.0
    n = len(v)
    for start in range(0, n, chunk):
        i = np.arange(start, min(start + chunk, n))
        den = denominator(i)
        num = np.abs(v[i, None] - v[None, :])
        ratio = np.divide(num, den, out=np.zeros_like(num), where=num > 0)
        best = max(best, float(ratio.max()))
    return best


@dataclass(frozen=True, eq=False)
class ModelDistance:
    eps: float
    delta: float
    scope: str  # "policy_pair" or "max"
    transform: AffineTransform
    ipm: IpmKind
    weight: WeightFn
    policies: Optional[tuple] = None


def model_distance(pair: ModelPair, w, transform: AffineTransform = IDENTITY,
                   ipm: Optional[IpmKind] = None, pi: Optional[Policy] = None,
                   pi_hat: Optional[Policy] = None) -> ModelDistance:
    """Cost and kernel distances; the maximal ones over (s, a) unless both policies are given."""
    w = as_weight(w)
    ipm = IpmKind.total_variation() if ipm is None else ipm
    m, m_hat = pair.m, pair.m_hat
    if len(w) != m.n_states:
        raise InvalidInputError("weight length does not match the number of states")
    if (pi is None) != (pi_hat is None):
        raise InvalidInputError("give both policies or neither")
    if pi is None:
        eps = float(np.max(np.abs(transform.apply(m.cost) - m_hat.cost) / w.weights[:, None]))
        dist = _row_distances(m.kernel, m_hat.kernel, ipm, m.labels).reshape(m.n_states, m.n_actions)
        delta = float(np.max(dist / w.weights[:, None]))
        return ModelDistance(eps, delta, "max", transform, ipm, w)
    c_pi, p_pi = induced(m, pi)
    c_hat, p_hat = induced(m_hat, pi_hat)
    eps = weighted_norm(transform.apply(c_pi) - c_hat, w)
    delta = weighted_norm(_row_distances(p_pi, p_hat, ipm, m.labels), w)
    return ModelDistance(eps, delta, "policy_pair", transform, ipm, w, (pi, pi_hat))


def mismatch_from_distance(dist: ModelDistance, rho_v: float, gamma: float) -> float:
    """Upper bound ``eps + gamma * rho(v) * delta`` on the matching mismatch functional."""
    return dist.eps + gamma * rho_v * dist.delta


IPM_VARIANTS = ("part1_hatV", "part1_V", "part2", "part3", "part4_hatV", "part4_V")


def ipm_performance_bound(pair: ModelPair, w, kappa: float, transform: AffineTransform = IDENTITY,
                          ipm: Optional[IpmKind] = None, variant: str = "part4_hatV",
                          oracle: bool = True) -> BoundReport:
    """Bound on ``||V^{pi_hat*} - V*||_w`` from model distances instead of exact mismatches."""
    if variant not in IPM_VARIANTS:
        raise InvalidInputError(f"unknown variant {variant!r}; expected one of {IPM_VARIANTS}")
    w = as_weight(w)
    ipm = IpmKind.total_variation() if ipm is None else ipm
    gamma, a1 = pair.discount, transform.alpha1
    scale = _scale(gamma, kappa)
    gk = gamma * kappa
    outer = math.inf if gk >= 1 else (1.0 + gk) / (1.0 - gk) ** 2
    labels = pair.m.labels
    pi_hat = pair.pi_hat_star
    n1, n2 = _alpha_assumptions(transform)

    def dist(pi=None, pi_h=None):
        return model_distance(pair, w, transform, ipm, pi, pi_h)

    if variant.endswith("hatV") or variant == "part2":
        rho = minkowski(pair.v_hat_star, ipm, labels)
    else:
        rho = a1 * minkowski(pair.v_star, ipm, labels)
    terms = {"rho": rho}

    if variant in ("part1_hatV", "part2"):
        other = pair.pi_star if variant == "part1_hatV" else pair.mu_star(transform)
        d_own, d_other = dist(pi_hat, pi_hat), dist(other, pi_hat)
        first = mismatch_from_distance(d_own, rho, gamma)
        second = mismatch_from_distance(d_other, rho, gamma)
        bound = (first + second) * scale / a1
        required = (2,) if variant == "part1_hatV" else (2, n1)
    elif variant in ("part1_V", "part3"):
        d_own = dist(pi_hat, pi_hat)
        d_other = (dist(pair.pi_star, pi_hat) if variant == "part1_V"
                   else dist(pair.pi_star, pair.mu_hat_star(transform)))
        first = mismatch_from_distance(d_own, rho, gamma)
        second = mismatch_from_distance(d_other, rho, gamma)
        bound = (first * scale + second * outer) / a1
        required = (2,) if variant == "part1_V" else (2, n2)
    else:
        d_max = dist()
        first = second = mismatch_from_distance(d_max, rho, gamma)
        power = scale if variant == "part4_hatV" else scale ** 2
        bound = 2.0 * first * power / a1
        required = (2, 5)
        d_own = d_other = d_max
    terms.update(eps_1=d_own.eps, delta_1=d_own.delta, eps_2=d_other.eps, delta_2=d_other.delta)

    realized = weighted_norm(pair.v_pihat - pair.v_star, w) if oracle else None
    part = variant.replace("_", "(") + ")" if "_" in variant else variant
    return _report(f"Thm5.{part[4:]}", bound, terms, pair, w, kappa, transform, required, realized,
                   notes={"ipm": ipm.kind})


def certainty_equivalence_bound(stoch: FiniteMdp, det: FiniteMdp, noise_mean_norm: float, w,
                                kappa: float, oracle: bool = True) -> BoundReport:
    """Loss of running the noise-free model's optimal policy on the noisy system.

    The bound is ``2 gamma E||N|| Lip(V_hat*) / (1 - gamma kappa)`` where the
    Lipschitz constant is taken along the state labels.
    """
    if noise_mean_norm < 0:
        raise InvalidInputError("noise_mean_norm must be nonnegative")
    pair = ModelPair(stoch, det)
    w = as_weight(w)
    lip = minkowski(pair.v_hat_star, IpmKind.wasserstein(), stoch.labels)
    gamma = stoch.discount
    bound = 2.0 * gamma * noise_mean_norm * lip * _scale(gamma, kappa)
    realized = weighted_norm(pair.v_pihat - pair.v_star, w) if oracle else None
    terms = {"noise_mean_norm": noise_mean_norm, "lip_V_hat": lip}
    return _report("CE", bound, terms, pair, w, kappa, IDENTITY, (2, 5), realized)


@dataclass(frozen=True)
class ScalarNoiseSystem:
    """Quantised scalar system ``s' = clip(round(drift * s) + a + N)`` on integer states."""

    s_max: int = 20
    a_max: int = 3
    drift: float = 0.8
    noise_values: tuple = (-1, 0, 1)
    noise_probs: tuple = (1 / 3, 1 / 3, 1 / 3)
    state_cost: float = 1.0
    action_cost: float = 0.5
    discount: float = 0.9

    def __post_init__(self):
        if self.s_max < 1 or self.a_max < 0:
            raise InvalidInputError("need s_max >= 1 and a_max >= 0")
        if len(self.noise_values) != len(self.noise_probs):
            raise InvalidInputError("noise values and probabilities must have equal length")
        probs = np.asarray(self.noise_probs, dtype=float)
        if probs.min() < 0 or abs(probs.sum() - 1.0) > 1e-12:
            raise InvalidInputError("noise probabilities must form a distribution")

    @property
    def labels(self) -> np.ndarray:
        return np.arange(-self.s_max, self.s_max + 1)

    @property
    def noise_mean_norm(self) -> float:
        return float(np.abs(np.asarray(self.noise_values, float)) @ np.asarray(self.noise_probs, float))

    def _build(self, noise_values, noise_probs) -> FiniteMdp:
        s = self.labels
        actions = np.arange(-self.a_max, self.a_max + 1)
        # round half up, so the map is monotone and deterministic
        centre = np.floor(self.drift * s + 0.5).astype(int)
        level = centre[:, None, None] + actions[None, :, None] + np.asarray(noise_values)[None, None, :]
        nxt = np.clip(level, -self.s_max, self.s_max) + self.s_max
        probs = np.broadcast_to(np.asarray(noise_probs, float), nxt.shape)
        cost = self.state_cost * np.abs(s)[:, None] + self.action_cost * np.abs(actions)[None, :]
        return FiniteMdp.from_outcomes(nxt, probs, cost.astype(float), self.discount, s)

    def stochastic(self) -> FiniteMdp:
        return self._build(self.noise_values, self.noise_probs)

    def deterministic(self) -> FiniteMdp:
        return self._build((0,), (1.0,))
