"""
cli.py - Command-line entry point.

  sparsepls simulate             write X.csv, Y.csv, beta_true.csv for one simulated dataset
  sparsepls fit                  fit one method at one (K, lambda) and dump the model as JSON
  sparsepls cv                   grid search one method and dump the CV result as JSON
  sparsepls experiment           repeated train/test comparison, JSON report + text table
  sparsepls selection-frequency  per-variable selection counts across experiment trials (CSV)

A JSON config (--config) supplies an ExperimentConfig; flags override it.
Exit codes: 0 success, 1 every trial (or the single fit) failed, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable

from pydantic import ValidationError

from . import __version__
from .data import Dataset, center_columns, save_csv, split_folds
from .errors import ConfigError, DataValidationError, FoldSplitError, SparsePlsError
from .experiment import (
    load_source,
    method_config,
    render_table,
    resolve_lambda_grid,
    run_experiment,
    selection_frequency_frame,
    write_report,
)
from .logging_utils import configure_logging, log_event
from .methods import METHOD_NAMES, fit_method
from .pls import PlsModel
from .schemas import CvResultRecord, ExperimentConfig, PlsModelRecord, SimSource, SparsePlsRecord
from .selection import cross_validate
from .settings import get_settings
from .simgen import generate


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _list_of(cast: Callable[[str], Any], what: str) -> Callable[[str], list]:
    def parse(text: str) -> list:
        try:
            return [cast(part.strip()) for part in text.split(",") if part.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list of {what}, got {text!r}") from None
    return parse


def _method_name(text: str) -> str:
    if text not in METHOD_NAMES:
        raise ValueError(text)
    return text


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config; flags override its values")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], default=None)

    sim = common.add_argument_group("simulated data")
    sim.add_argument("--model", type=int, choices=[1, 2, 3, 4], dest="model_id")
    sim.add_argument("--n", type=int)
    sim.add_argument("--p", type=int)
    sim.add_argument("--n-test", type=int)

    csv = common.add_argument_group("CSV data")
    csv.add_argument("--x", help="predictor matrix CSV")
    csv.add_argument("--y", help="response matrix CSV")
    csv.add_argument("--subjects", help="one-column CSV of subject labels")
    csv.add_argument("--no-header", action="store_true", help="CSV files have no header row")
    csv.add_argument("--protocol", choices=["random_split", "leave_one_subject_out"])
    csv.add_argument("--test-fraction", type=float)

    grid = common.add_argument_group("methods and grids")
    grid.add_argument("--methods", type=_list_of(_method_name, f"methods from {', '.join(METHOD_NAMES)}"))
    grid.add_argument("--k-grid", type=_list_of(int, "integers"))
    grid.add_argument("--lambda-grid", type=_list_of(float, "numbers"))
    grid.add_argument("--lambda-mode", choices=["relative", "absolute"])
    grid.add_argument("--l1-lambda-grid", type=_list_of(float, "numbers"))
    grid.add_argument("--folds", type=int)
    grid.add_argument("--scale", action="store_true", default=None, help="divide X columns by their sd")
    grid.add_argument("--mse-mode", choices=["mean", "sum"])
    grid.add_argument("--kappa", type=float)

    admm = common.add_argument_group("ADMM schedule")
    admm.add_argument("--mu0", type=float)
    admm.add_argument("--mu-growth", type=float)
    admm.add_argument("--max-iter", type=int)
    admm.add_argument("--dual-rescale", choices=["on", "off"])

    run = common.add_argument_group("run")
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--threads", type=int)
    run.add_argument("--out")
    run.add_argument("--timings", action="store_true", default=None, dest="record_timings",
                     help="record wall-clock seconds (reports stop being byte-reproducible)")

    parser = argparse.ArgumentParser(prog="sparsepls", description="Sparse partial least squares regression.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="write one simulated dataset as CSV")

    fit = sub.add_parser("fit", parents=[common], help="fit one method at one grid cell")
    fit.add_argument("--method", type=_method_name)
    fit.add_argument("--k", type=int, help="number of components (default: first of --k-grid)")
    fit.add_argument("--lambda", type=float, dest="lam",
                     help="penalty; relative to lambda_max for global_simpls unless --lambda-mode absolute")

    cv = sub.add_parser("cv", parents=[common], help="cross-validate one method over its grid")
    cv.add_argument("--method", type=_method_name)

    sub.add_parser("experiment", parents=[common], help="repeated train/test comparison")
    sub.add_parser("selection-frequency", parents=[common], help="selection counts per variable across trials")
    return parser


# ---------------------------------------------------------------------------
# Config assembly
# ---------------------------------------------------------------------------

def _put(target: dict, key: str, value: Any) -> None:
    if value is not None:
        target[key] = value


def _read_config(path: str) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return payload


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    payload = _read_config(args.config) if args.config else {}
    source = dict(payload.get("source") or {})

    if args.x or args.y or args.subjects or args.protocol or args.test_fraction is not None:
        if source.get("kind") != "csv":
            source = {"kind": "csv"}
        _put(source, "x_path", args.x)
        _put(source, "y_path", args.y)
        _put(source, "subjects_path", args.subjects)
        _put(source, "protocol", args.protocol)
        _put(source, "test_fraction", args.test_fraction)
        if args.no_header:
            source["has_header"] = False
    else:
        sim_flags = {"model_id": args.model_id, "n": args.n, "p": args.p, "n_test": args.n_test}
        if any(v is not None for v in sim_flags.values()):
            if source.get("kind", "sim") != "sim":
                raise ConfigError("--model, --n, --p and --n-test apply to simulated sources only")
            source["kind"] = "sim"
            for key, value in sim_flags.items():
                _put(source, key, value)
        elif args.no_header and source.get("kind") == "csv":
            source["has_header"] = False
    if source:
        payload["source"] = source

    for key in ("methods", "k_grid", "lambda_grid", "lambda_mode", "l1_lambda_grid", "folds", "seed", "trials",
                "threads", "out", "scale", "mse_mode", "kappa", "record_timings"):
        _put(payload, key, getattr(args, key))

    admm = dict(payload.get("admm") or {})
    _put(admm, "mu0", args.mu0)
    _put(admm, "mu_growth", args.mu_growth)
    _put(admm, "max_iter", args.max_iter)
    if args.dual_rescale is not None:
        admm["dual_rescale"] = args.dual_rescale == "on"
    if admm:
        payload["admm"] = admm

    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration:\n{exc}") from None


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _dataset(config: ExperimentConfig) -> Dataset:
    if isinstance(config.source, SimSource):
        return generate(config.source.spec(config.seed))
    return load_source(config.source)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text + "\n")
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n", encoding="utf-8")
    print(f"wrote {path}")


def _cmd_simulate(args: argparse.Namespace, config: ExperimentConfig) -> int:
    if not isinstance(config.source, SimSource):
        raise ConfigError("simulate needs a simulated source (--model/--n/--p), not CSV input")
    data = _dataset(config)
    out = Path(config.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    save_csv(out / "X.csv", data.X, data.x_names)
    save_csv(out / "Y.csv", data.Y, data.y_names)
    save_csv(out / "beta_true.csv", data.beta_true, data.y_names)
    print(f"wrote X.csv, Y.csv, beta_true.csv to {out} (n={data.n}, p={data.p}, seed={config.seed})")
    return 0


def _cmd_fit(args: argparse.Namespace, config: ExperimentConfig) -> int:
    data = _dataset(config)
    name = args.method or config.methods[0]
    K = args.k if args.k is not None else config.k_grid[0]
    centered = center_columns(data, scale=config.scale)
    lam = 0.0
    if args.lam is not None:
        lam = args.lam
        if name == "global_simpls":
            lam = resolve_lambda_grid(config.model_copy(update={"lambda_grid": [args.lam]}), name, centered)[0]
    model = fit_method(method_config(config, name), centered.Xc, centered.Yc, K, lam, centering=centered.stats)
    if isinstance(model, PlsModel):
        record = PlsModelRecord.from_model(model)
    else:
        record = SparsePlsRecord.from_model(model)
    _emit(record.model_dump_json(indent=2), config.out)
    return 0


def _cmd_cv(args: argparse.Namespace, config: ExperimentConfig) -> int:
    data = _dataset(config)
    name = args.method or config.methods[0]
    centered = center_columns(data, scale=config.scale)
    lambdas = resolve_lambda_grid(config, name, centered)
    folds = split_folds(data.n, config.folds, config.seed, data.subject_ids)
    cv = cross_validate(data, method_config(config, name), config.k_grid, lambdas, folds,
                        scale=config.scale, mse_mode=config.mse_mode, threads=config.threads)
    _emit(CvResultRecord.from_result(name, cv).model_dump_json(indent=2), config.out)
    return 0


def _cmd_experiment(args: argparse.Namespace, config: ExperimentConfig) -> int:
    report = run_experiment(config)
    json_path, text_path = write_report(report, config.out or "report.json")
    sys.stdout.write(render_table(report))
    print(f"wrote {json_path} and {text_path}")
    if report.all_failed:
        log_event("all_trials_failed", level="error")
        return 1
    return 0


def _cmd_selection_frequency(args: argparse.Namespace, config: ExperimentConfig) -> int:
    report = run_experiment(config)
    out = Path(config.out or "selection_frequency.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    selection_frequency_frame(report).to_csv(out, index=False)
    print(f"wrote {out}")
    return 1 if report.all_failed else 0


COMMANDS: dict[str, Callable[[argparse.Namespace, ExperimentConfig], int]] = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "cv": _cmd_cv,
    "experiment": _cmd_experiment,
    "selection-frequency": _cmd_selection_frequency,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        configure_logging(args.log_level or get_settings().log_level)
        config = config_from_args(args)
        return COMMANDS[args.command](args, config)
    except (ConfigError, DataValidationError, FoldSplitError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SparsePlsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
