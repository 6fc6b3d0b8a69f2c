"""Inventory-control MDP with binomial demand and its weight-function families."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bounds import best_envelope_over_weights, envelope, performance_loss_bound, witness_kappa
from .mdp import DEFAULT_MAX_ITER, DEFAULT_TOL, AffineTransform, FiniteMdp, InvalidInputError
from .mismatch import ModelPair
from .tables import CsvTable
from .weighting import WeightFn, kappa_model


@dataclass(frozen=True)
class InventoryParams:
    s_max: int
    discount: float
    demand_n: int
    demand_q: float
    hold_cost: float
    short_cost: float
    proc_cost: float

    def __post_init__(self):
        if self.s_max < 1:
            raise InvalidInputError("s_max must be at least 1")
        if not 0.0 < self.discount < 1.0:
            raise InvalidInputError("discount must lie in (0, 1)")
        if self.demand_n < 0 or not 0.0 <= self.demand_q <= 1.0:
            raise InvalidInputError("demand must be Binomial(n >= 0, 0 <= q <= 1)")
        if min(self.hold_cost, self.short_cost, self.proc_cost) < 0:
            raise InvalidInputError("costs must be nonnegative")

    @property
    def n_states(self) -> int:
        return 2 * self.s_max + 1

    @property
    def labels(self) -> np.ndarray:
        return np.arange(-self.s_max, self.s_max + 1)


TRUE_PARAMS = InventoryParams(500, 0.75, 10, 0.4, 4.0, 2.0, 5.0)
APPROX_PARAMS = InventoryParams(500, 0.75, 10, 0.5, 3.8, 2.0, 5.0)


def binomial_pmf(n: int, q: float) -> np.ndarray:
    """Binomial(n, q) masses on 0..n, renormalised so they sum to one."""
    if q in (0.0, 1.0):
        pmf = np.zeros(n + 1)
        pmf[0 if q == 0.0 else n] = 1.0
        return pmf
    k = np.arange(n + 1)
    log_pmf = np.array([math.log(math.comb(n, i)) for i in k]) + k * math.log(q) + (n - k) * math.log1p(-q)
    pmf = np.exp(log_pmf)
    mode = int(np.argmax(pmf))
    pmf[mode] += 1.0 - pmf.sum()
    return pmf


def stage_cost(params: InventoryParams) -> np.ndarray:
    s = params.labels.astype(float)[:, None]
    a = np.arange(params.s_max + 1, dtype=float)[None, :]
    holding = params.hold_cost * np.maximum(s, 0.0) + params.short_cost * np.maximum(-s, 0.0)
    return params.proc_cost * a + holding


def build_inventory(params: InventoryParams) -> FiniteMdp:
    """States are stock levels -s_max..s_max, actions order 0..s_max units."""
    labels = params.labels
    n_a = params.s_max + 1
    pmf = binomial_pmf(params.demand_n, params.demand_q)
    demand = np.arange(params.demand_n + 1)
    level = labels[:, None, None] + np.arange(n_a)[None, :, None] - demand[None, None, :]
    next_index = np.clip(level, -params.s_max, params.s_max) + params.s_max
    probs = np.broadcast_to(pmf, next_index.shape)
    return FiniteMdp.from_outcomes(next_index, probs, stage_cost(params), params.discount, labels)


def weight_shape(params_hat: InventoryParams) -> np.ndarray:
    s = params_hat.labels.astype(float)
    return params_hat.hold_cost * np.maximum(s, 0.0) + params_hat.short_cost * np.maximum(-s, 0.0)


def build_weight(params_hat: InventoryParams, ell: float) -> WeightFn:
    """``w(s) = 1 + ell * c_bar(s)`` with the approximate model's holding/shortage costs."""
    if ell < 0:
        raise InvalidInputError("ell must be nonnegative")
    return WeightFn(1.0 + ell * weight_shape(params_hat))


def base_stock(params: InventoryParams, level: int) -> np.ndarray:
    """Order quantities of the order-up-to-``level`` policy."""
    return np.maximum(0, level - params.labels)


EXPERIMENTS = ("fig_im_bound", "fig_weight_family", "fig_alpha", "fig_model_stability")


@dataclass(frozen=True)
class ExperimentSpec:
    ell: float = 1.5e-2
    family_ells: tuple = (0.0, 0.5e-2, 1e-2, 1.5e-2, 2e-2, 2.5e-2)
    stability_ells: tuple = tuple(k * 0.25e-4 for k in range(9))
    alphas: tuple = ((1.0, 0.0), (0.98, 0.8))
    zoom: tuple = (-10, 10)
    oracle: bool = True
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER


@dataclass
class ExperimentResult:
    name: str
    tables: list
    certified: bool  # False when no lower bound beyond the sup-norm baseline certified
    notes: dict = field(default_factory=dict)


def _model_meta(params: InventoryParams, params_hat: InventoryParams) -> dict:
    def tup(p):
        return (f"({p.s_max}, {p.discount:g}, {p.demand_n}, {p.demand_q:g}, "
                f"{p.hold_cost:g}, {p.short_cost:g}, {p.proc_cost:g})")
    return {"true_model": tup(params), "approx_model": tup(params_hat)}


def _base_columns(pair: ModelPair, params: InventoryParams):
    return ["s", "V_hat_pi"], [params.labels, pair.v_pihat]


def _finish(header, columns, pair, spec):
    if spec.oracle:
        header.append("V_star")
        columns.append(pair.v_star)
    return header, columns


def _ell_name(ell: float) -> str:
    return f"{ell:.6g}"


def run_experiment(name: str, params: InventoryParams = TRUE_PARAMS,
                   params_hat: InventoryParams = APPROX_PARAMS,
                   spec: ExperimentSpec = ExperimentSpec(), pair: ModelPair = None) -> ExperimentResult:
    """Run one of the inventory experiments and return its CSV tables.

    Certification always solves the true model (the optimal policy is an
    assumption witness); ``spec.oracle=False`` only drops the V* column.
    """
    if name not in EXPERIMENTS:
        raise InvalidInputError(f"unknown experiment {name!r}; expected one of {EXPERIMENTS}")
    if params.labels.shape != params_hat.labels.shape or params.discount != params_hat.discount:
        raise InvalidInputError("true and approximate models must share s_max and discount")
    if pair is None:
        pair = ModelPair(build_inventory(params), build_inventory(params_hat), spec.tol, spec.max_iter)
    meta = {"experiment": name, **_model_meta(params, params_hat), "discount": params.discount}
    runner = {"fig_im_bound": _fig_im_bound, "fig_weight_family": _fig_weight_family,
              "fig_alpha": _fig_alpha, "fig_model_stability": _fig_model_stability}[name]
    return runner(pair, params, params_hat, spec, meta)


def _fig_im_bound(pair, params, params_hat, spec, meta):
    n = params.n_states
    weighted = build_weight(params_hat, spec.ell)
    uniform = WeightFn.ones(n)
    reports = {}
    for label, w in (("weighted", weighted), ("sup", uniform)):
        kappa = witness_kappa(pair, w)
        reports[label] = performance_loss_bound(pair, w, kappa, oracle=False)
    header, columns = _base_columns(pair, params)
    for label in ("weighted", "sup"):
        header.append(f"lower_{label}")
        columns.append(envelope(pair, reports[label]).lower)
    header, columns = _finish(header, columns, pair, spec)
    meta = dict(meta, ell=spec.ell, theorem=reports["weighted"].theorem)
    for label, r in reports.items():
        meta[f"{label}_kappa"] = r.cert.kappa
        meta[f"{label}_gamma_kappa"] = r.cert.gamma_kappa
        meta[f"{label}_bound"] = r.bound
        meta[f"{label}_status"] = r.status
    table = CsvTable("fig_im_bound", header, columns, meta)
    return ExperimentResult("fig_im_bound", [table], reports["weighted"].certified, {"reports": reports})


def _fig_weight_family(pair, params, params_hat, spec, meta):
    tables, family, reports = [], [], {}
    for ell in spec.family_ells:
        w = build_weight(params_hat, ell)
        kappa = witness_kappa(pair, w)
        report = performance_loss_bound(pair, w, kappa, oracle=False)
        reports[ell] = report
        header, columns = _base_columns(pair, params)
        header.append("lower")
        columns.append(envelope(pair, report).lower)
        header, columns = _finish(header, columns, pair, spec)
        tables.append(CsvTable(f"fig_weight_family_ell_{_ell_name(ell)}", header, columns,
                               dict(meta, ell=ell, kappa=kappa, gamma_kappa=report.cert.gamma_kappa,
                                    bound=report.bound, status=report.status)))
        if report.certified:
            family.append(ell)
    if not family:
        raise InvalidInputError("no weight in the family is certified")
    members = [(build_weight(params_hat, ell), reports[ell].cert.kappa) for ell in family]
    best = best_envelope_over_weights(pair, members)
    header, columns = _base_columns(pair, params)
    header += ["lower_best", "best_ell"]
    columns += [best.lower, np.asarray(family)[best.best_member]]
    header, columns = _finish(header, columns, pair, spec)
    skipped = [ell for ell in spec.family_ells if ell not in family]
    tables.append(CsvTable("fig_weight_family_min", header, columns,
                           dict(meta, ells=" ".join(_ell_name(e) for e in family),
                                uncertified=" ".join(_ell_name(e) for e in skipped) or "none")))
    # the l = 0 member is the sup-norm baseline
    certified = any(ell > 0 for ell in family)
    return ExperimentResult("fig_weight_family", tables, certified, {"reports": reports})


def _fig_alpha(pair, params, params_hat, spec, meta):
    w = build_weight(params_hat, spec.ell)
    header, columns = _base_columns(pair, params)
    meta = dict(meta, ell=spec.ell)
    reports = {}
    for a1, a2 in spec.alphas:
        t = AffineTransform(float(a1), float(a2))
        kappa = witness_kappa(pair, w, t, (2, 3 if t.is_identity else 6))
        report = performance_loss_bound(pair, w, kappa, t, oracle=False)
        reports[(a1, a2)] = report
        key = f"a{a1:g}_{a2:g}"
        header.append(f"lower_{key}")
        columns.append(envelope(pair, report).lower)
        meta.update({f"{key}_kappa": kappa, f"{key}_bound": report.bound,
                     f"{key}_theorem": report.theorem, f"{key}_status": report.status})
    header, columns = _finish(header, columns, pair, spec)
    table = CsvTable("fig_alpha", header, columns, meta)
    return ExperimentResult("fig_alpha", [table], any(r.certified for r in reports.values()),
                            {"reports": reports})


def _fig_model_stability(pair, params, params_hat, spec, meta):
    header, columns = _base_columns(pair, params)
    reports, certified = {}, []
    meta = dict(meta)
    for ell in spec.stability_ells:
        w = build_weight(params_hat, ell)
        kappa_bar = max(kappa_model(pair.m, w).kappa, kappa_model(pair.m_hat, w).kappa)
        report = performance_loss_bound(pair, w, kappa_bar, oracle=False)
        reports[ell] = report
        key = _ell_name(ell)
        header.append(f"lower_ell_{key}")
        columns.append(envelope(pair, report).lower if report.certified
                       else np.full(params.n_states, -np.inf))
        meta.update({f"ell_{key}_kappa_bar": kappa_bar, f"ell_{key}_gamma_kappa": report.cert.gamma_kappa,
                     f"ell_{key}_status": report.status})
        if report.certified:
            certified.append((ell, w, kappa_bar))
        else:
            warnings.warn(f"model stability fails at ell={key}", stacklevel=2)
    if certified:
        best = best_envelope_over_weights(pair, [(w, k) for _, w, k in certified])
        header.append("best_ell")
        columns.append(np.asarray([ell for ell, _, _ in certified])[best.best_member])
    header, columns = _finish(header, columns, pair, spec)
    table = CsvTable("fig_model_stability", header, columns, meta)
    return ExperimentResult("fig_model_stability", [table], bool(certified), {"reports": reports})
