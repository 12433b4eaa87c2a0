"""Command-line surface: simulate | fit | montecarlo | backtest.

Every command reads a JSON config (validated up front, unknown keys
rejected), honours ``--seed`` and ``--out`` overrides, and writes
deterministic CSV/JSON files plus optional SVG figures.  Failures exit
nonzero with a machine-readable JSON error on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .backtest import BacktestPlan, run_backtest
from .core import ModelSpec, QuantileGrid
from .dgp import DgpConfig, run_replications
from .fitter import FitRequest, fit, pack_coefficients
from .io import read_series_csv, write_csv, write_json, write_series_csv
from .optim import OptimOptions
from .study import EstimatorSpec, StudyPlan, run_study

__all__ = ["main", "cmd_simulate", "cmd_fit", "cmd_montecarlo", "cmd_backtest"]

_DEFAULT_GRID = list(np.arange(1, 10) / 10.0)


# ---------------------------------------------------------------------------
# config schemas
# ---------------------------------------------------------------------------

_OPTIM_SCHEMA = {"max_iters": None, "pop_size": None, "tol_fun": 1e-10,
                 "tol_x": 1e-12}
_DATA_SCHEMA = {"path": None, "y_column": "y", "exog_columns": []}
_MODEL_SCHEMA = {"lag_y": 1, "asymmetric_slope": False, "quantile_lags": 1}

_SCHEMAS = {
    "simulate": {
        "seed": 0,
        "n_replications": 2,
        "grid_levels": _DEFAULT_GRID,
        "dgp": {"design": "y1", "process": "qar1", "n_obs": 50, "burn_in": 50,
                "coef_center": [2.0, 0.5, -3.0, 0.25],
                "coef_spread": [1.0, 0.15, 1.0, 0.075]},
    },
    "fit": {
        "seed": 0,
        "data": _DATA_SCHEMA,
        "model": _MODEL_SCHEMA,
        "grid_levels": _DEFAULT_GRID,
        "penalty_weight": 0.0,
        "optimizer": "cmaes",
        "init_strategy": "zeros",
        "recursion_init": "empirical",
        "sigma0": 0.5,
        "optim": _OPTIM_SCHEMA,
        "emit_plots": False,
        "plot_levels": [0.05, 0.5, 0.95],
    },
    "montecarlo": {
        "seed": 0,
        "n_replications": 2,
        "processes": ["qar1"],
        "designs": ["y1"],
        "sample_sizes": [50],
        "estimators": [{"name": "dynqr_pw0", "optimizer": "cmaes",
                        "penalty_weight": 0.0, "init_strategy": "zeros"}],
        "grid_levels": _DEFAULT_GRID,
        "report_taus": [0.1, 0.5, 0.9],
        "recursion_init": "empirical",
        "optim": _OPTIM_SCHEMA,
        "emit_plots": False,
    },
    "backtest": {
        "seed": 0,
        "data": _DATA_SCHEMA,
        "model": _MODEL_SCHEMA,
        "grid_levels": _DEFAULT_GRID,
        "penalty_weight": 0.0,
        "optimizer": "cmaes",
        "init_strategy": "zeros",
        "recursion_init": "empirical",
        "sigma0": 0.5,
        "optim": _OPTIM_SCHEMA,
        "backtest": {"initial_window": 100, "refit_every": 1,
                     "window_mode": "expanding", "rolling_width": None,
                     "warm_start": True},
        "emit_plots": False,
        "plot_levels": [0.05, 0.5, 0.95],
    },
}

_ESTIMATOR_SCHEMA = {"name": None, "optimizer": "cmaes",
                     "penalty_weight": 0.0, "init_strategy": "zeros"}


class ConfigError(ValueError):
    pass


def _apply_schema(config, schema, where):
    if not isinstance(config, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(config) - set(schema)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    merged = {}
    for key, default in schema.items():
        if isinstance(default, dict):
            merged[key] = _apply_schema(config.get(key, {}), default,
                                        f"{where}.{key}")
        else:
            merged[key] = config.get(key, default)
    return merged


def validate_config(command: str, config: dict) -> dict:
    merged = _apply_schema(config, _SCHEMAS[command], command)
    if command == "montecarlo":
        merged["estimators"] = [
            _apply_schema(e, _ESTIMATOR_SCHEMA, f"montecarlo.estimators[{i}]")
            for i, e in enumerate(merged["estimators"])]
        for i, est in enumerate(merged["estimators"]):
            if not est["name"]:
                raise ConfigError(f"montecarlo.estimators[{i}]: a name is required")
    if command in ("fit", "backtest") and not merged["data"]["path"]:
        raise ConfigError(f"{command}.data.path is required")
    return merged


# ---------------------------------------------------------------------------
# shared builders
# ---------------------------------------------------------------------------

def _grid(config) -> QuantileGrid:
    return QuantileGrid(np.asarray(config["grid_levels"], dtype=float))


def _optim_options(block) -> OptimOptions:
    return OptimOptions(max_iters=block["max_iters"], pop_size=block["pop_size"],
                        tol_fun=block["tol_fun"], tol_x=block["tol_x"])


def _load_data(block):
    return read_series_csv(block["path"], y_column=block["y_column"],
                           exog_columns=list(block["exog_columns"]))


def _fit_request(config, seed) -> FitRequest:
    model = config["model"]
    spec = ModelSpec(lag_y=int(model["lag_y"]),
                     asymmetric_slope=bool(model["asymmetric_slope"]),
                     quantile_lags=int(model["quantile_lags"]))
    return FitRequest(spec=spec, grid=_grid(config),
                      penalty_weight=float(config["penalty_weight"]),
                      optimizer=config["optimizer"],
                      init_strategy=config["init_strategy"],
                      recursion_init=config["recursion_init"],
                      optim_options=_optim_options(config["optim"]),
                      sigma0=float(config["sigma0"]), seed=seed)


def _level_columns(grid: QuantileGrid) -> list[str]:
    return [f"q_{lvl:g}" for lvl in grid.levels]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(config: dict, out_dir: Path) -> list[Path]:
    grid = _grid(config)
    block = config["dgp"]
    cfg = DgpConfig(coef_center=np.asarray(block["coef_center"], dtype=float),
                    coef_spread=np.asarray(block["coef_spread"], dtype=float),
                    design=block["design"], process=block["process"],
                    n_obs=int(block["n_obs"]), burn_in=int(block["burn_in"]),
                    seed=int(config["seed"]))
    datasets = run_replications(cfg, int(config["n_replications"]), grid)
    written = []
    for i, ds in enumerate(datasets):
        path = out_dir / f"replication_{i:03d}.csv"
        write_series_csv(path, ds.data)
        written.append(path)
    truth = datasets[0].true_coefficients
    truth_path = out_dir / "truth.json"
    write_json(truth_path, {
        "grid_levels": list(grid.levels),
        "design": cfg.design,
        "process": cfg.process,
        "coefficient_names": ["const", "y_lag1", "x_exog"],
        "beta": [list(row) for row in truth.beta],
        "theta": [list(row) for row in truth.theta],
    })
    written.append(truth_path)
    return written


def cmd_fit(config: dict, out_dir: Path) -> list[Path]:
    data = _load_data(config["data"])
    req = _fit_request(config, int(config["seed"]))
    result = fit(data, req)
    grid = req.grid

    coef_path = out_dir / "coefficients.json"
    write_json(coef_path, {
        "grid_levels": list(grid.levels),
        "coefficient_names": req.spec.design_column_names(data),
        "beta": [list(row) for row in result.coefficients.beta],
        "theta": [list(row) for row in result.coefficients.theta],
        "packed": list(pack_coefficients(result.coefficients)),
        "objective_value": result.objective_value,
        "pinball_component": result.pinball_component,
        "penalty_component": result.penalty_component,
        "crossing_incidence_pct": result.crossing_incidence_pct,
        "evaluations": result.optim_diagnostics.evaluations,
        "termination_reason": result.optim_diagnostics.termination_reason,
    })
    paths_path = out_dir / "fitted_paths.csv"
    write_csv(paths_path, ["t"] + _level_columns(grid),
              [[t] + list(result.paths.values[t]) for t in range(data.n_obs)])
    written = [coef_path, paths_path]
    if config["emit_plots"]:
        from .plots import fan_chart
        fig_path = out_dir / "fit_fan.svg"
        fan_chart(data.y, result.paths.values, grid.levels, fig_path,
                  shown=tuple(config["plot_levels"]))
        written.append(fig_path)
    return written


def cmd_montecarlo(config: dict, out_dir: Path) -> list[Path]:
    estimators = [EstimatorSpec(name=e["name"], optimizer=e["optimizer"],
                                penalty_weight=float(e["penalty_weight"]),
                                init_strategy=e["init_strategy"])
                  for e in config["estimators"]]
    optim = config["optim"]
    plan = StudyPlan(processes=list(config["processes"]),
                     designs=list(config["designs"]),
                     sample_sizes=[int(t) for t in config["sample_sizes"]],
                     estimators=estimators,
                     n_reps=int(config["n_replications"]),
                     grid_levels=np.asarray(config["grid_levels"], dtype=float),
                     report_taus=[float(t) for t in config["report_taus"]],
                     recursion_init=config["recursion_init"],
                     max_iters=optim["max_iters"], pop_size=optim["pop_size"],
                     tol_fun=optim["tol_fun"])
    result = run_study(plan, master_seed=int(config["seed"]))

    bias_sorted = sorted(result.bias_rows,
                         key=lambda r: (r["process"], r["design"], r["T"],
                                        r["estimator"], r["init"], r["tau"],
                                        r["penalty_weight"]))
    cross_sorted = sorted(result.crossing_rows,
                          key=lambda r: (r["process"], r["design"], r["T"],
                                         r["estimator"], r["init"],
                                         r["penalty_weight"]))
    bias_header = ["process", "design", "T", "estimator", "init",
                   "penalty_weight", "tau", "bias"]
    cross_header = ["process", "design", "T", "estimator", "init",
                    "penalty_weight", "crossing_pct", "mean_crossing_distance"]
    written = []
    for name, header, rows in (("bias", bias_header, bias_sorted),
                               ("crossing", cross_header, cross_sorted)):
        csv_path = out_dir / f"{name}.csv"
        write_csv(csv_path, header, [[r[k] for k in header] for r in rows])
        json_path = out_dir / f"{name}.json"
        write_json(json_path, {"rows": rows})
        written += [csv_path, json_path]
    if config["emit_plots"]:
        from .plots import crossing_by_penalty
        fig_path = out_dir / "crossing_by_penalty.svg"
        crossing_by_penalty(cross_sorted, fig_path)
        written.append(fig_path)
    return written


def cmd_backtest(config: dict, out_dir: Path) -> list[Path]:
    data = _load_data(config["data"])
    block = config["backtest"]
    if data.n_obs < int(block["initial_window"]) + 2:
        raise ConfigError("series is shorter than initial_window + 2")
    template = _fit_request(config, int(config["seed"]))
    plan = BacktestPlan(fit_template=template,
                        initial_window=int(block["initial_window"]),
                        refit_every=int(block["refit_every"]),
                        window_mode=block["window_mode"],
                        rolling_width=block["rolling_width"],
                        warm_start=bool(block["warm_start"]))
    result = run_backtest(data, plan)
    grid = template.grid

    fc_path = out_dir / "forecasts.csv"
    write_csv(fc_path, ["origin_index", "realized"] + _level_columns(grid),
              [[r.origin_index, r.realized] + list(r.forecast_quantiles)
               for r in result.records])
    coef_path = out_dir / "backtest_coefficients.csv"
    coef_names = template.spec.design_column_names(data)
    coef_header = ["origin_index", "tau"] + coef_names + (
        ["theta"] if template.spec.quantile_lags else [])
    coef_rows = []
    for r in result.records:
        for q, tau in enumerate(grid.levels):
            row = [r.origin_index, tau] + list(r.coefficients.beta[q])
            if template.spec.quantile_lags:
                row.append(r.coefficients.theta[q, 0])
            coef_rows.append(row)
    write_csv(coef_path, coef_header, coef_rows)

    scores_path = out_dir / "scores.json"
    write_json(scores_path, {
        "n_records": len(result.records),
        "unsorted": result.report_unsorted.qwcrps_by_scheme,
        "sorted": result.report_sorted.qwcrps_by_scheme,
    })
    written = [fc_path, coef_path, scores_path]
    if config["emit_plots"]:
        from .plots import forecast_fan
        fig_path = out_dir / "forecast_fan.svg"
        forecast_fan(result.realized, result.forecast_matrix, grid.levels,
                     fig_path, shown=tuple(config["plot_levels"]))
        written.append(fig_path)
    return written


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "montecarlo": cmd_montecarlo,
    "backtest": cmd_backtest,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynqr",
        description="Joint dynamic quantile estimation with a crossing penalty")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config master seed")
        p.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        config = validate_config(args.command, raw)
        if args.seed is not None:
            config["seed"] = args.seed
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = _COMMANDS[args.command](config, out_dir)
    except Exception as exc:  # contract: machine-readable error, nonzero exit
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
