"""``mdp-approx`` command line: inventory experiments, LQR and certainty-equivalence
bounds, and the random soundness battery.

Exit codes: 0 success, 2 when results were produced but none of the headline
bounds could be certified, 1 on errors.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from dataclasses import fields
from pathlib import Path

import numpy as np

from .inventory import (
    APPROX_PARAMS,
    EXPERIMENTS,
    TRUE_PARAMS,
    ExperimentSpec,
    InventoryParams,
    build_inventory,
    run_experiment,
)
from .ipm import ScalarNoiseSystem, certainty_equivalence_bound
from .lqr import LqrModel, lqr_performance_bound, realized_gap
from .mismatch import ModelPair
from .suite import run_lqr_suite, run_random_suite
from .tables import write_plots

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_ERROR, EXIT_UNCERTIFIED = 0, 1, 2


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config

_SECTIONS = {"output", "inventory", "lqr", "ce", "random_suite"}
_OUTPUT_KEYS = {"out", "emit_plots", "oracle"}
_INVENTORY_KEYS = {"experiments", "true_model", "approx_model", "ell", "family_ells",
                   "stability_ells", "alphas", "zoom", "tol", "max_iter"}
_LQR_MODEL_KEYS = {"a", "b", "q", "r", "sigma_w", "discount"}
_LQR_KEYS = {"true_model", "approx_model", "ell", "alpha2"}
_CE_KEYS = {f.name for f in fields(ScalarNoiseSystem)} | {"noise_mean_norm", "kappa"}
_SUITE_KEYS = {"instances", "seed", "lqr_pairs", "duality_samples"}


def _check_keys(table: dict, allowed: set, where: str) -> None:
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")


def load_config(path) -> dict:
    """Parse and validate a TOML experiment configuration."""
    try:
        with open(path, "rb") as fh:
            config = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    _check_keys(config, _SECTIONS, "top level")
    _check_keys(config.get("output", {}), _OUTPUT_KEYS, "output")
    if "inventory" in config:
        inv = config["inventory"]
        _check_keys(inv, _INVENTORY_KEYS, "inventory")
        allowed = {f.name for f in fields(InventoryParams)}
        for key in ("true_model", "approx_model"):
            _check_keys(inv.get(key, {}), allowed, f"inventory.{key}")
        for name in inv.get("experiments", []):
            if name not in EXPERIMENTS:
                raise ConfigError(f"inventory.experiments: unknown experiment {name!r}")
    if "lqr" in config:
        _check_keys(config["lqr"], _LQR_KEYS, "lqr")
        for key in ("true_model", "approx_model"):
            _check_keys(config["lqr"].get(key, {}), _LQR_MODEL_KEYS, f"lqr.{key}")
        if "a" not in config["lqr"].get("true_model", {}):
            raise ConfigError("lqr.true_model needs at least 'a'")
    if "ce" in config:
        _check_keys(config["ce"], _CE_KEYS, "ce")
    if "random_suite" in config:
        _check_keys(config["random_suite"], _SUITE_KEYS, "random_suite")
    return config


def _inventory_params(base: InventoryParams, overrides: dict) -> InventoryParams:
    values = {f.name: getattr(base, f.name) for f in fields(InventoryParams)}
    values.update(overrides)
    return InventoryParams(**values)


def _experiment_spec(inv: dict, oracle: bool) -> ExperimentSpec:
    kwargs = {"oracle": oracle}
    for key in ("ell", "tol", "max_iter"):
        if key in inv:
            kwargs[key] = inv[key]
    for key in ("family_ells", "stability_ells", "zoom"):
        if key in inv:
            kwargs[key] = tuple(inv[key])
    if "alphas" in inv:
        kwargs["alphas"] = tuple(tuple(a) for a in inv["alphas"])
    return ExperimentSpec(**kwargs)


# ---------------------------------------------------------------- runners

def run_inventory(inv: dict, out: Path, emit_plots: bool, oracle: bool, stream=None) -> int:
    stream = stream or sys.stdout
    params = _inventory_params(TRUE_PARAMS, inv.get("true_model", {}))
    params_hat = _inventory_params(APPROX_PARAMS, inv.get("approx_model", {}))
    spec = _experiment_spec(inv, oracle)
    names = inv.get("experiments", list(EXPERIMENTS))
    pair = ModelPair(build_inventory(params), build_inventory(params_hat), spec.tol, spec.max_iter)
    code = EXIT_OK
    for name in names:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = run_experiment(name, params, params_hat, spec, pair)
        for table in result.tables:
            path = table.write(out)
            print(f"{name}: wrote {path}", file=stream)
            if emit_plots:
                for svg in write_plots(table, out, zoom=spec.zoom):
                    print(f"{name}: wrote {svg}", file=stream)
        if not result.certified:
            print(f"{name}: UNCERTIFIED (no certified bound beyond the sup-norm baseline)", file=stream)
            code = EXIT_UNCERTIFIED
    return code


def _lqr_model(table: dict, base: LqrModel = None) -> LqrModel:
    def get(key, default):
        return np.atleast_2d(np.asarray(table[key], dtype=float)) if key in table else default

    if base is None:
        a = get("a", None)
        n = a.shape[0]
        b = get("b", np.eye(n))
        return LqrModel(a, b, get("q", np.eye(n)), get("r", np.eye(b.shape[1])),
                        get("sigma_w", np.eye(n)), float(table.get("discount", 0.9)))
    return LqrModel(get("a", base.a_mat), get("b", base.b_mat), get("q", base.q_mat), get("r", base.r_mat),
                    get("sigma_w", base.sigma_w), float(table.get("discount", base.discount)))


def run_lqr(cfg: dict, oracle: bool, stream=None) -> int:
    stream = stream or sys.stdout
    m = _lqr_model(cfg["true_model"])
    m_hat = _lqr_model(cfg.get("approx_model", {}), m)
    ell = float(cfg.get("ell", 0.01))
    report = lqr_performance_bound(m, m_hat, ell, cfg.get("alpha2", "auto"))
    print(f"rho(D*)       {report.rho_d_star:.17g}", file=stream)
    print(f"rho(D^pi_hat) {report.rho_d_pihat:.17g}", file=stream)
    print(f"d_Sigma       {report.d_sigma:.17g}", file=stream)
    print(f"alpha2        {report.alpha2:.17g}", file=stream)
    print(f"b_Sigma       {report.cert.b_Sigma:.17g}", file=stream)
    print(f"b_sigma       {report.cert.b_sigma:.17g}", file=stream)
    print(f"kappa         {report.kappa:.17g}", file=stream)
    print(f"ell           {report.ell:.17g}", file=stream)
    print(f"bound         {report.bound:.17g}", file=stream)
    if oracle:
        gap = realized_gap(m, m_hat, ell, report.cert.solution, report.cert.solution_hat)
        print(f"realized      {gap:.17g}", file=stream)
    print(f"status        {report.status}", file=stream)
    return EXIT_OK if report.certified else EXIT_UNCERTIFIED


def run_ce(cfg: dict, oracle: bool, stream=None) -> int:
    stream = stream or sys.stdout
    system_keys = {f.name for f in fields(ScalarNoiseSystem)}
    kwargs = {k: (tuple(v) if isinstance(v, list) else v) for k, v in cfg.items() if k in system_keys}
    system = ScalarNoiseSystem(**kwargs)
    noise = float(cfg.get("noise_mean_norm", system.noise_mean_norm))
    kappa = float(cfg.get("kappa", 1.0))
    w = np.ones(len(system.labels))
    report = certainty_equivalence_bound(system.stochastic(), system.deterministic(), noise, w, kappa, oracle)
    print(f"E|N|          {noise:.17g}", file=stream)
    print(f"Lip(V_hat*)   {report.terms['lip_V_hat']:.17g}", file=stream)
    print(f"kappa         {kappa:.17g}", file=stream)
    print(f"discount      {system.discount:.17g}", file=stream)
    print(f"bound         {report.bound:.17g}", file=stream)
    if oracle:
        print(f"realized      {report.realized:.17g}", file=stream)
    print(f"status        {report.status}", file=stream)
    return EXIT_OK if report.certified else EXIT_UNCERTIFIED


def run_suite(cfg: dict, stream=None) -> int:
    stream = stream or sys.stdout
    result = run_random_suite(int(cfg.get("instances", 200)), int(cfg.get("seed", 0)),
                              int(cfg.get("duality_samples", 1000)))
    print(result.summary(), file=stream)
    ok = result.passed
    pairs = int(cfg.get("lqr_pairs", 0))
    if pairs:
        lqr = run_lqr_suite(pairs, int(cfg.get("seed", 0)))
        print(lqr.summary(), file=stream)
        ok = ok and lqr.passed
    print("PASS" if ok else "FAIL", file=stream)
    return EXIT_OK if ok else EXIT_ERROR


def run(config_path, out=None, emit_plots=None, oracle=None, stream=None) -> int:
    """Run every section of a configuration file; returns the process exit code."""
    stream = stream or sys.stdout
    try:
        config = load_config(config_path)
        output = config.get("output", {})
        out = Path(out if out is not None else output.get("out", "results"))
        emit_plots = output.get("emit_plots", False) if emit_plots is None else emit_plots
        oracle = output.get("oracle", True) if oracle is None else oracle
        codes = []
        if "inventory" in config:
            codes.append(run_inventory(config["inventory"], out, emit_plots, oracle, stream))
        if "lqr" in config:
            codes.append(run_lqr(config["lqr"], oracle, stream))
        if "ce" in config:
            codes.append(run_ce(config["ce"], oracle, stream))
        if "random_suite" in config:
            codes.append(run_suite(config["random_suite"], stream))
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if EXIT_ERROR in codes:
        return EXIT_ERROR
    return EXIT_UNCERTIFIED if EXIT_UNCERTIFIED in codes else EXIT_OK


# ---------------------------------------------------------------- argparse

def _matrix_arg(text: str) -> list:
    """Parse ``"1 0; 0 1"`` (rows separated by ';', entries by spaces or commas)."""
    try:
        return [[float(x) for x in row.replace(",", " ").split()] for row in text.split(";")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad matrix {text!r}") from exc


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which here means "uncertified"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML configuration file")
    common.add_argument("--out", type=Path, help="output directory (default: results)")
    common.add_argument("--emit-plots", action="store_true", default=None, help="also write SVG plots")
    common.add_argument("--no-oracle", action="store_true", help="skip realized-gap columns and values")
    common.add_argument("--seed", type=int, help="seed for the random suite")

    parser = _Parser(prog="mdp-approx", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    inv = sub.add_parser("inventory", parents=[common], help="inventory-control experiments")
    inv.add_argument("--experiment", choices=EXPERIMENTS + ("all",), default="all")

    lqr = sub.add_parser("lqr", parents=[common], help="closed-form LQR bound")
    for name in ("a", "b", "q", "r", "sigma-w"):
        lqr.add_argument(f"--{name}", type=_matrix_arg)
        lqr.add_argument(f"--{name}-hat", type=_matrix_arg)
    lqr.add_argument("--gamma", type=float)
    lqr.add_argument("--ell", type=float)
    lqr.add_argument("--alpha2", default=None, help="number or 'auto'")

    ce = sub.add_parser("ce", parents=[common], help="certainty-equivalence bound on a noisy scalar system")
    ce.add_argument("--s-max", type=int)
    ce.add_argument("--a-max", type=int)
    ce.add_argument("--drift", type=float)
    ce.add_argument("--noise-values", type=lambda s: [int(x) for x in s.split(",")])
    ce.add_argument("--noise-probs", type=lambda s: [float(x) for x in s.split(",")])
    ce.add_argument("--noise-mean-norm", type=float)
    ce.add_argument("--gamma", type=float)

    suite = sub.add_parser("random-suite", parents=[common], help="random soundness battery")
    suite.add_argument("--instances", type=int)
    suite.add_argument("--lqr-pairs", type=int)

    runp = sub.add_parser("run", parents=[common], help="run every section of a config file")
    runp.add_argument("config_file", type=Path)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    oracle = not args.no_oracle
    try:
        if args.command == "run":
            return run(args.config_file, args.out, args.emit_plots, False if args.no_oracle else None)
        config = load_config(args.config) if args.config else {}
        out = args.out or Path(config.get("output", {}).get("out", "results"))
        emit_plots = bool(args.emit_plots or config.get("output", {}).get("emit_plots", False))

        if args.command == "inventory":
            inv = dict(config.get("inventory", {}))
            if args.experiment != "all":
                inv["experiments"] = [args.experiment]
            return run_inventory(inv, out, emit_plots, oracle)

        if args.command == "lqr":
            cfg = dict(config.get("lqr", {}))
            true_model = dict(cfg.get("true_model", {}))
            approx = dict(cfg.get("approx_model", {}))
            for key in ("a", "b", "q", "r", "sigma_w"):
                value = getattr(args, key)
                if value is not None:
                    true_model[key] = value
                hat = getattr(args, f"{key}_hat")
                if hat is not None:
                    approx[key] = hat
            if args.gamma is not None:
                true_model["discount"] = approx["discount"] = args.gamma
            if "a" not in true_model:
                raise ConfigError("lqr needs at least the A matrix (--a or [lqr.true_model])")
            cfg.update(true_model=true_model, approx_model=approx)
            if args.ell is not None:
                cfg["ell"] = args.ell
            if args.alpha2 is not None:
                cfg["alpha2"] = args.alpha2 if args.alpha2 == "auto" else float(args.alpha2)
            return run_lqr(cfg, oracle)

        if args.command == "ce":
            cfg = dict(config.get("ce", {}))
            for key in ("s_max", "a_max", "drift", "noise_values", "noise_probs", "noise_mean_norm"):
                value = getattr(args, key)
                if value is not None:
                    cfg[key] = value
            if args.gamma is not None:
                cfg["discount"] = args.gamma
            return run_ce(cfg, oracle)

        cfg = dict(config.get("random_suite", {}))
        if args.instances is not None:
            cfg["instances"] = args.instances
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.lqr_pairs is not None:
            cfg["lqr_pairs"] = args.lqr_pairs
        return run_suite(cfg)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
