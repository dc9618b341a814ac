"""
experiment.py - Repeated train/test comparison of the fitting methods.

Per trial:
  1. build a training and a test set (two independent simulations, or a
     split of the CSV rows: random or one held-out subject)
  2. cross-validate every method on the training set over its (K, lambda) grid
  3. refit at the selected cell on the whole training set
  4. score the refit on the test set

Trials may run on a thread pool; rows are assembled by trial index so the
report does not depend on completion order.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .admm import lambda_max
from .data import CenteredData, Dataset, center_columns, load_csv, load_subjects, split_folds
from .errors import ConfigError, DataValidationError
from .logging_utils import log_event, set_method, set_run_id, set_trial_id
from .methods import MethodConfig, fit_method
from .schemas import (
    CsvSource,
    ExperimentConfig,
    ExperimentReport,
    MethodAggregate,
    PairwiseTest,
    Provenance,
    SimSource,
    TrialRow,
)
from .selection import (
    cross_validate,
    default_lambda_grid,
    latent_response_correlation,
    mse,
    paired_t_test_one_sided,
    per_response_mse,
    r_squared,
    selection_frequency,
    support_fraction,
)
from .settings import get_settings
from .simgen import generate

PAIRWISE_METRICS: dict[str, str] = {
    "components": "n_components",
    "variables": "n_selected",
    "mse": "test_mse",
}


@dataclass(frozen=True)
class TrialData:
    index: int
    seed: int
    train: Dataset
    test: Dataset


# ---------------------------------------------------------------------------
# Data sources
# ---------------------------------------------------------------------------

def load_source(source: CsvSource) -> Dataset:
    """Read X, Y and optional subject labels; row counts must agree across files."""
    X = load_csv(source.x_path, has_header=source.has_header)
    Y = load_csv(source.y_path, has_header=source.has_header)
    nx, ny = X.values.shape[0], Y.values.shape[0]
    if nx != ny:
        raise ConfigError(f"{source.x_path} has {nx} rows but {source.y_path} has {ny}")
    subjects = None
    if source.subjects_path:
        subjects = load_subjects(source.subjects_path, has_header=source.has_header)
        if len(subjects) != nx:
            raise ConfigError(
                f"{source.subjects_path} has {len(subjects)} labels but {source.x_path} has {nx} rows"
            )
    return Dataset(X=X.values, Y=Y.values, subject_ids=subjects, x_names=X.names, y_names=Y.names)


def trial_seeds(seed: int, trial: int) -> tuple[int, int]:
    """Independent (train, test) seeds for one trial."""
    train_seed, test_seed = np.random.SeedSequence([seed, trial]).generate_state(2)
    return int(train_seed), int(test_seed)


def _sim_trials(source: SimSource, config: ExperimentConfig) -> list[TrialData]:
    out = []
    for t in range(config.trials):
        train_seed, test_seed = trial_seeds(config.seed, t)
        out.append(TrialData(
            index=t,
            seed=train_seed,
            train=generate(source.spec(train_seed)),
            test=generate(source.spec(test_seed, test=True)),
        ))
    return out


def _csv_trials(source: CsvSource, config: ExperimentConfig) -> list[TrialData]:
    data = load_source(source)
    out = []
    if source.protocol == "leave_one_subject_out":
        labels = np.asarray(data.subject_ids)
        units = pd.unique(labels)
        if config.trials != len(units):
            log_event("trials_follow_subjects", requested=config.trials, subjects=len(units))
        for t, unit in enumerate(units):
            test = np.flatnonzero(labels == unit)
            train = np.flatnonzero(labels != unit)
            if train.size < 2 or test.size < 2:
                raise ConfigError(
                    f"holding out subject {unit!r} gives {train.size} training and {test.size} "
                    "test rows; need at least 2 of each"
                )
            out.append(TrialData(index=t, seed=trial_seeds(config.seed, t)[0],
                                 train=data.subset(train), test=data.subset(test)))
        return out

    n_test = max(2, int(round(source.test_fraction * data.n)))
    if data.n - n_test < 2:
        raise ConfigError(f"test_fraction={source.test_fraction} leaves fewer than 2 training rows of {data.n}")
    for t in range(config.trials):
        seed = trial_seeds(config.seed, t)[0]
        perm = np.random.default_rng(seed).permutation(data.n)
        out.append(TrialData(index=t, seed=seed, train=data.subset(np.sort(perm[n_test:])),
                             test=data.subset(np.sort(perm[:n_test]))))
    return out


def build_trials(config: ExperimentConfig) -> list[TrialData]:
    if isinstance(config.source, SimSource):
        return _sim_trials(config.source, config)
    return _csv_trials(config.source, config)


# ---------------------------------------------------------------------------
# One trial
# ---------------------------------------------------------------------------

def resolve_lambda_grid(config: ExperimentConfig, method: str, centered: CenteredData) -> list[float]:
    """Absolute penalty values for one method on one training set."""
    if method == "l1_spls":
        return list(config.l1_lambda_grid or get_settings().cv.l1_lambda_grid)
    if method != "global_simpls":
        return [0.0]
    K = max(config.k_grid)
    if config.lambda_grid is None:
        return default_lambda_grid(centered.Xc, centered.Yc, K, config.admm)
    if config.lambda_mode == "absolute":
        return list(config.lambda_grid)
    top = lambda_max(centered.Xc, centered.Yc, K, config.admm)
    return [v * top for v in config.lambda_grid]


def method_config(config: ExperimentConfig, name: str) -> MethodConfig:
    return MethodConfig(name=name, admm=config.admm, kappa=config.kappa)


def _run_method(config: ExperimentConfig, trial: TrialData, name: str) -> TrialRow:
    train, test = trial.train, trial.test
    method = method_config(config, name)
    centered = center_columns(train, scale=config.scale)
    lambdas = resolve_lambda_grid(config, name, centered)
    folds = split_folds(train.n, config.folds, trial.seed, train.subject_ids)

    t0 = time.perf_counter()
    cv = cross_validate(train, method, config.k_grid, lambdas, folds, scale=config.scale, mse_mode=config.mse_mode)
    t1 = time.perf_counter()
    model = fit_method(method, centered.Xc, centered.Yc, cv.best_K, cv.best_lambda, centering=centered.stats)
    t2 = time.perf_counter()
    Yhat = model.predict(test.X)
    t3 = time.perf_counter()

    try:
        train_r2 = r_squared(train.Y, model.predict(train.X))
    except DataValidationError:
        train_r2 = None

    timings = {}
    if config.record_timings:
        timings = {"cv_seconds": t1 - t0, "fit_seconds": t2 - t1, "predict_seconds": t3 - t2}
    return TrialRow(
        trial=trial.index,
        method=name,
        best_K=cv.best_K,
        best_lambda=cv.best_lambda,
        n_components=model.n_components,
        n_selected=int(np.count_nonzero(model.selected)),
        test_mse=mse(test.Y, Yhat, config.mse_mode),
        per_response_mse=per_response_mse(test.Y, Yhat).tolist(),
        train_r2=train_r2,
        support_fraction=support_fraction(model.selected, train.beta_true),
        latent_correlations=latent_response_correlation(model, train),
        selected=np.flatnonzero(model.selected).tolist(),
        **timings,
    )


def run_trial(config: ExperimentConfig, trial: TrialData, run_id: str) -> list[TrialRow]:
    set_run_id(run_id)
    set_trial_id(trial.index)
    rows = []
    try:
        for name in config.methods:
            set_method(name)
            try:
                rows.append(_run_method(config, trial, name))
            except Exception as exc:
                log_event("trial_failed", level="warning", error=f"{type(exc).__name__}: {exc}")
                rows.append(TrialRow(trial=trial.index, method=name, failed=True,
                                     error=f"{type(exc).__name__}: {exc}"))
    finally:
        set_method(None)
        set_trial_id(None)
    return rows


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def _mean(values: list[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def aggregate_rows(methods: list[str], rows: list[TrialRow], timed: bool) -> list[MethodAggregate]:
    out = []
    for name in methods:
        ok = [r for r in rows if r.method == name and not r.failed]
        failed = sum(1 for r in rows if r.method == name and r.failed)
        seconds = None
        if timed:
            seconds = _mean([r.cv_seconds + r.fit_seconds + r.predict_seconds for r in ok])
        out.append(MethodAggregate(
            method=name,
            n_success=len(ok),
            n_failed=failed,
            mean_components=_mean([r.n_components for r in ok]),
            mean_selected=_mean([r.n_selected for r in ok]),
            mean_test_mse=_mean([r.test_mse for r in ok]),
            mean_train_r2=_mean([r.train_r2 for r in ok]),
            mean_support_fraction=_mean([r.support_fraction for r in ok]),
            mean_seconds=seconds,
        ))
    return out


def pairwise_tests(methods: list[str], rows: list[TrialRow]) -> list[PairwiseTest]:
    """One-sided paired t-tests, H1: metric(a) < metric(b), over trials where both succeeded."""
    by_key = {(r.trial, r.method): r for r in rows if not r.failed}
    trials = sorted({r.trial for r in rows})
    out = []
    for a in methods:
        for b in methods:
            if a == b:
                continue
            shared = [t for t in trials if (t, a) in by_key and (t, b) in by_key]
            for metric, attr in PAIRWISE_METRICS.items():
                p_value = None
                if len(shared) >= 2:
                    xa = [float(getattr(by_key[(t, a)], attr)) for t in shared]
                    xb = [float(getattr(by_key[(t, b)], attr)) for t in shared]
                    p_value = paired_t_test_one_sided(xa, xb)
                out.append(PairwiseTest(method_a=a, method_b=b, metric=metric, n=len(shared), p_value=p_value))
    return out


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    run_id = f"exp-{config.seed}"
    set_run_id(run_id)
    trials = build_trials(config)
    log_event("experiment_started", trials=len(trials), methods=list(config.methods))

    if config.threads > 1 and len(trials) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            per_trial = list(pool.map(lambda tr: run_trial(config, tr, run_id), trials))
    else:
        per_trial = [run_trial(config, tr, run_id) for tr in trials]
    rows = [row for trial_rows in per_trial for row in trial_rows]

    methods = list(config.methods)
    report = ExperimentReport(
        aggregates=aggregate_rows(methods, rows, config.record_timings),
        pairwise=pairwise_tests(methods, rows),
        rows=rows,
        provenance=Provenance(
            version=__version__,
            run_id=run_id,
            seeds=[tr.seed for tr in trials],
            n_variables=trials[0].train.p,
            config=config.model_dump(mode="json"),
        ),
    )
    failed = sum(r.failed for r in rows)
    log_event("experiment_finished", level="warning" if failed else "info", rows=len(rows), failed=failed)
    set_run_id(None)
    return report


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _fmt(value: float | int | None) -> str:
    return "-" if value is None else f"{value:.4g}"


def render_table(report: ExperimentReport) -> str:
    timed = any(a.mean_seconds is not None for a in report.aggregates)
    header = ["method", "ok", "failed", "components", "variables", "test MSE", "train R2", "support"]
    if timed:
        header.append("seconds")
    body = []
    for a in report.aggregates:
        cells = [a.method, str(a.n_success), str(a.n_failed), _fmt(a.mean_components), _fmt(a.mean_selected),
                 _fmt(a.mean_test_mse), _fmt(a.mean_train_r2), _fmt(a.mean_support_fraction)]
        if timed:
            cells.append(_fmt(a.mean_seconds))
        body.append(cells)
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]

    def line(cells: list[str]) -> str:
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    out = [line(header), line(["-" * w for w in widths]), *(line(c) for c in body)]
    if report.pairwise:
        out += ["", "one-sided paired t-tests (H1: mean(a - b) < 0)"]
        for t in report.pairwise:
            out.append(f"  {t.method_a} < {t.method_b}  {t.metric:<10}  n={t.n}  p={_fmt(t.p_value)}")
    return "\n".join(out) + "\n"


def write_report(report: ExperimentReport, out: str | Path) -> tuple[Path, Path]:
    """JSON report at out, text table next to it with a .txt suffix."""
    json_path = Path(out)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    text_path = json_path.with_suffix(".txt")
    text_path.write_text(render_table(report), encoding="utf-8")
    return json_path, text_path


def selection_frequency_frame(report: ExperimentReport) -> pd.DataFrame:
    """Per-variable (1-based) selection counts and frequencies for every method."""
    p = report.provenance.n_variables
    frame = pd.DataFrame({"variable": np.arange(1, p + 1)})
    for agg in report.aggregates:
        masks = []
        for row in report.rows:
            if row.method == agg.method and not row.failed:
                mask = np.zeros(p, dtype=bool)
                mask[row.selected] = True
                masks.append(mask)
        counts = selection_frequency(masks) if masks else np.zeros(p, dtype=int)
        frame[f"{agg.method}_count"] = counts
        frame[f"{agg.method}_frequency"] = counts / len(masks) if masks else 0.0
    return frame
