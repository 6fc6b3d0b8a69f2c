"""Discounted linear-quadratic regulation: Riccati and Lyapunov solvers, stability
certificates for the quadratic weight ``w(s) = 1 + ell s's``, and the closed-form
performance-loss bound for certainty-equivalent style model mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .mdp import ConvergenceError, InvalidInputError
from .weighting import VALIDITY_MARGIN

SYM_TOL = 1e-10
PSD_TOL = 1e-10
RANK_TOL = 1e-9
RICCATI_TOL = 1e-12
MAX_ITER = 100_000
GROWTH_PATIENCE = 20


class UnstableError(ConvergenceError):
    """A linear policy does not stabilise the discounted closed loop."""


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def spectral_radius(m) -> float:
    """Spectral radius of a symmetric matrix."""
    m = np.asarray(m, dtype=float)
    return float(np.max(np.abs(np.linalg.eigvalsh(_sym(m))), initial=0.0))


def sigma_max_sq(m) -> float:
    """Squared operator 2-norm (largest singular value squared)."""
    return float(np.linalg.norm(np.asarray(m, dtype=float), 2) ** 2)


def _matrix(x, name: str, shape=None) -> np.ndarray:
    a = np.atleast_2d(np.array(x, dtype=float))
    if a.ndim != 2 or not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} must be a finite matrix")
    if shape is not None and a.shape != shape:
        raise InvalidInputError(f"{name} has shape {a.shape}, expected {shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LqrModel:
    """``s' = A s + B a + w`` with ``w ~ (0, Sigma)`` and cost ``s'Qs + a'Ra``."""

    a_mat: np.ndarray
    b_mat: np.ndarray
    q_mat: np.ndarray
    r_mat: np.ndarray
    sigma_w: np.ndarray
    discount: float

    def __post_init__(self):
        a = _matrix(self.a_mat, "A")
        n_s = a.shape[0]
        if a.shape != (n_s, n_s):
            raise InvalidInputError("A must be square")
        b = _matrix(self.b_mat, "B")
        if b.shape[0] != n_s:
            raise InvalidInputError("B must have as many rows as A")
        n_a = b.shape[1]
        q = _matrix(self.q_mat, "Q", (n_s, n_s))
        r = _matrix(self.r_mat, "R", (n_a, n_a))
        sigma = _matrix(self.sigma_w, "Sigma_W", (n_s, n_s))
        for name, m in (("Q", q), ("R", r), ("Sigma_W", sigma)):
            if np.max(np.abs(m - m.T)) > SYM_TOL:
                raise InvalidInputError(f"{name} must be symmetric")
        if np.linalg.eigvalsh(q).min() < -PSD_TOL or np.linalg.eigvalsh(sigma).min() < -PSD_TOL:
            raise InvalidInputError("Q and Sigma_W must be positive semidefinite")
        if np.linalg.eigvalsh(r).min() < PSD_TOL:
            raise InvalidInputError("R must be positive definite")
        if not 0.0 < self.discount < 1.0:
            raise InvalidInputError("discount must lie in (0, 1)")
        for name, m in (("a_mat", a), ("b_mat", b), ("q_mat", q), ("r_mat", r), ("sigma_w", sigma)):
            object.__setattr__(self, name, m)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def n_states(self) -> int:
        return self.a_mat.shape[0]

    @property
    def n_actions(self) -> int:
        return self.b_mat.shape[1]

    def replace(self, **changes) -> "LqrModel":
        fields = dict(a_mat=self.a_mat, b_mat=self.b_mat, q_mat=self.q_mat, r_mat=self.r_mat,
                      sigma_w=self.sigma_w, discount=self.discount)
        fields.update(changes)
        return LqrModel(**fields)

    def closed_loop(self, gain) -> np.ndarray:
        return self.a_mat - self.b_mat @ np.atleast_2d(gain)


def _unstable_modes(a: np.ndarray) -> np.ndarray:
    eig = np.linalg.eigvals(a)
    return eig[np.abs(eig) >= 1.0 - RANK_TOL]


def _full_rank(m: np.ndarray, n: int) -> bool:
    sv = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(sv > RANK_TOL * max(1.0, sv.max(initial=0.0)))) == n


def is_stabilizable(model: LqrModel) -> bool:
    """Hautus test on the discount-scaled pair ``(sqrt(g) A, sqrt(g) B)``."""
    root = np.sqrt(model.discount)
    a, b = root * model.a_mat, root * model.b_mat
    n = model.n_states
    return all(_full_rank(np.hstack([lam * np.eye(n) - a, b.astype(complex)]), n)
               for lam in _unstable_modes(a))


def is_detectable(model: LqrModel) -> bool:
    """Hautus test on ``(sqrt(g) A, Q^(1/2))``."""
    a = np.sqrt(model.discount) * model.a_mat
    vals, vecs = np.linalg.eigh(model.q_mat)
    q_half = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
    n = model.n_states
    return all(_full_rank(np.vstack([lam * np.eye(n) - a, q_half.astype(complex)]), n)
               for lam in _unstable_modes(a))


def greedy_gain(model: LqrModel, p_mat) -> np.ndarray:
    """Gain of the one-step greedy policy for the quadratic value ``s'Ps``."""
    g, a, b = model.discount, model.a_mat, model.b_mat
    return g * np.linalg.solve(model.r_mat + g * b.T @ p_mat @ b, b.T @ p_mat @ a)


def riccati_map(model: LqrModel, p_mat) -> np.ndarray:
    g, a, b = model.discount, model.a_mat, model.b_mat
    inner = model.r_mat + g * b.T @ p_mat @ b
    if np.linalg.eigvalsh(_sym(inner)).min() <= 0:
        raise ConvergenceError("R + g B'PB lost positive definiteness", np.inf)
    pa = b.T @ p_mat @ a
    return _sym(model.q_mat + g * a.T @ p_mat @ a - g * g * pa.T @ np.linalg.solve(inner, pa))


def noise_constant(model: LqrModel, p_mat) -> float:
    """Constant ``g Tr(Sigma P) / (1 - g)`` of a quadratic value with noise."""
    return model.discount * float(np.trace(model.sigma_w @ p_mat)) / (1.0 - model.discount)


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    p_mat: np.ndarray
    q_const: float
    gain: np.ndarray
    residual: float
    iterations: int

    def value(self, s) -> float:
        s = np.asarray(s, dtype=float)
        return float(s @ self.p_mat @ s + self.q_const)


def solve_riccati(model: LqrModel, tol: float = RICCATI_TOL, max_iter: int = MAX_ITER,
                  check: bool = True) -> RiccatiSolution:
    """Fixed-point iteration of the discounted Riccati map from ``P = Q``.

    Stops once ``||map(P) - P||_2 <= tol * max(1, ||P||_2)``.
    """
    if check and not (is_stabilizable(model) and is_detectable(model)):
        raise InvalidInputError("model must be stabilizable and detectable")
    p = _sym(np.array(model.q_mat))
    residual = np.inf
    for it in range(1, max_iter + 1):
        p_next = riccati_map(model, p)
        residual = float(np.linalg.norm(p_next - p, 2))
        p = p_next
        if residual <= tol * max(1.0, float(np.linalg.norm(p, 2))):
            p, residual, extra = _polish(model, p, residual)
            if np.linalg.eigvalsh(p).min() < -1e-9 * max(1.0, np.abs(p).max()):
                raise ConvergenceError("Riccati iterate is not positive semidefinite", residual)
            return RiccatiSolution(p, noise_constant(model, p), greedy_gain(model, p), residual, it + extra)
    raise ConvergenceError("Riccati iteration did not converge", residual)


def _polish(model: LqrModel, p: np.ndarray, residual: float, limit: int = 500):
    """Keep iterating while the residual still shrinks, down to the rounding floor."""
    for extra in range(limit):
        p_next = riccati_map(model, p)
        new_residual = float(np.linalg.norm(p_next - p, 2))
        if not new_residual < residual:
            return p, residual, extra
        p, residual = p_next, new_residual
    return p, residual, limit


def evaluate_linear_policy(model: LqrModel, gain, tol: float = RICCATI_TOL,
                           max_iter: int = MAX_ITER) -> tuple[np.ndarray, float]:
    """``(P_pi, q_pi)`` with ``V^pi(s) = s'P_pi s + q_pi`` for the policy ``a = -K s``."""
    gain = np.atleast_2d(np.asarray(gain, dtype=float))
    if gain.shape != (model.n_actions, model.n_states):
        raise InvalidInputError("gain must have shape (n_actions, n_states)")
    g = model.discount
    a_k = model.closed_loop(gain)
    if g * np.max(np.abs(np.linalg.eigvals(a_k))) ** 2 >= 1.0:
        raise UnstableError("closed loop is not stable under discounting", np.inf)
    stage = _sym(model.q_mat + gain.T @ model.r_mat @ gain)
    p = stage
    residual, growing = np.inf, 0
    for _ in range(max_iter):
        p_next = _sym(stage + g * a_k.T @ p @ a_k)
        new_residual = float(np.linalg.norm(p_next - p, 2))
        growing = growing + 1 if new_residual > residual else 0
        if growing >= GROWTH_PATIENCE:
            raise UnstableError("policy evaluation diverges", new_residual)
        residual, p = new_residual, p_next
        if residual <= tol * max(1.0, float(np.linalg.norm(p, 2))):
            for _ in range(500):  # run down to the rounding floor
                p_next = _sym(stage + g * a_k.T @ p @ a_k)
                new_residual = float(np.linalg.norm(p_next - p, 2))
                if not new_residual < residual:
                    break
                residual, p = new_residual, p_next
            return p, noise_constant(model, p)
    raise ConvergenceError("policy evaluation did not converge", residual)


@dataclass(frozen=True, eq=False)
class LqStabilityCert:
    kappa: float
    b_sigma: float
    b_Sigma: float
    valid: bool
    ell: float
    solution: RiccatiSolution
    solution_hat: RiccatiSolution
    gain_mu: np.ndarray  # greedy gain of V_hat* in the true model
    singular_values_sq: dict


def _check_pair(m: LqrModel, m_hat: LqrModel, ell: float) -> None:
    if (m.n_states, m.n_actions) != (m_hat.n_states, m_hat.n_actions):
        raise InvalidInputError("models must have matching dimensions")
    if m.discount != m_hat.discount:
        raise InvalidInputError("models must share the discount factor")
    if not ell > 0:
        raise InvalidInputError("ell must be positive")


def certify_lq_stability(m: LqrModel, m_hat: LqrModel, ell: float,
                         solution: Optional[RiccatiSolution] = None,
                         solution_hat: Optional[RiccatiSolution] = None) -> LqStabilityCert:
    """kappa for ``w(s) = 1 + ell s's`` covering the optimal, deployed and greedy closed loops."""
    _check_pair(m, m_hat, ell)
    sol = solve_riccati(m) if solution is None else solution
    sol_hat = solve_riccati(m_hat) if solution_hat is None else solution_hat
    gain_mu = greedy_gain(m, sol_hat.p_mat)
    b_Sigma = max(1.0 + ell * float(np.trace(m.sigma_w)), 1.0 + ell * float(np.trace(m_hat.sigma_w)))
    sv = {
        "A - B K*": sigma_max_sq(m.closed_loop(sol.gain)),
        "A - B K_hat*": sigma_max_sq(m.closed_loop(sol_hat.gain)),
        "A_hat - B_hat K_hat*": sigma_max_sq(m_hat.closed_loop(sol_hat.gain)),
        "A - B K_mu": sigma_max_sq(m.closed_loop(gain_mu)),
    }
    b_sigma = max(sv.values())
    kappa = max(b_Sigma, b_sigma)
    valid = m.discount * kappa < 1.0 - VALIDITY_MARGIN
    return LqStabilityCert(kappa, b_sigma, b_Sigma, valid, ell, sol, sol_hat, gain_mu, sv)


@dataclass(frozen=True, eq=False)
class LqrBoundReport:
    d_star: np.ndarray
    d_pihat: np.ndarray
    k_hat: np.ndarray
    d_sigma: float
    alpha2: float
    kappa: float
    ell: float
    bound: float
    rho_d_star: float
    rho_d_pihat: float
    cert: LqStabilityCert

    @property
    def certified(self) -> bool:
        return self.cert.valid

    @property
    def status(self) -> str:
        return "certified" if self.certified else "uncertified"


def lqr_performance_bound(m: LqrModel, m_hat: LqrModel, ell: float,
                          alpha2: Union[float, str] = "auto",
                          cert: Optional[LqStabilityCert] = None) -> LqrBoundReport:
    """Closed-form bound on ``||V^{pi_hat*} - V*||_w`` for ``w(s) = 1 + ell s's``.

    Only the approximate model's Riccati solution enters the bound.  With
    ``alpha2="auto"`` the constant offset is cancelled by ``alpha2 = -d_Sigma``.
    """
    cert = certify_lq_stability(m, m_hat, ell) if cert is None else cert
    g, a, b = m.discount, m.a_mat, m.b_mat
    p_hat = cert.solution_hat.p_mat
    k_hat = cert.solution_hat.gain
    d_star = riccati_map(m, p_hat) - p_hat
    a_k = m.closed_loop(k_hat)
    d_pihat = _sym(m.q_mat + k_hat.T @ m.r_mat @ k_hat + g * a_k.T @ p_hat @ a_k) - p_hat
    d_sigma = g * float(np.trace((m.sigma_w - m_hat.sigma_w) @ p_hat))
    if isinstance(alpha2, str):
        if alpha2 != "auto":
            raise InvalidInputError("alpha2 must be a number or 'auto'")
        alpha2 = -d_sigma
    alpha2 = float(alpha2)
    rho_star, rho_pihat = spectral_radius(d_star), spectral_radius(d_pihat)
    offset = abs(d_sigma + alpha2)
    gk = g * cert.kappa
    if gk >= 1.0:
        bound = np.inf
    else:
        bound = (max(rho_star / ell, offset) + max(rho_pihat / ell, offset)) / (1.0 - gk)
    return LqrBoundReport(d_star, d_pihat, k_hat, d_sigma, alpha2, cert.kappa, ell, float(bound),
                          rho_star, rho_pihat, cert)


def weighted_quadratic_sup(delta, c: float, ell: float) -> float:
    """``sup_s |s' D s + c| / (1 + ell s's)`` for symmetric ``D``.

    For a fixed radius the numerator is extreme along eigenvectors, and
    ``r -> (lam r + c) / (1 + ell r)`` is monotone, so the supremum is the
    larger of the value at ``r = 0`` and the limit ``|lam| / ell``.
    """
    return max(abs(c), spectral_radius(delta) / ell)


def realized_gap(m: LqrModel, m_hat: LqrModel, ell: float,
                 solution: Optional[RiccatiSolution] = None,
                 solution_hat: Optional[RiccatiSolution] = None) -> float:
    """Exact ``||V^{pi_hat*} - V*||_w`` from the two quadratic value functions."""
    sol = solve_riccati(m) if solution is None else solution
    sol_hat = solve_riccati(m_hat) if solution_hat is None else solution_hat
    p_pi, q_pi = evaluate_linear_policy(m, sol_hat.gain)
    return weighted_quadratic_sup(p_pi - sol.p_mat, q_pi - sol.q_const, ell)
