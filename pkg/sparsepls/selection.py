"""
selection.py - Error metrics, one-sided paired t-tests and (K, lambda) grid CV.

CV centers every training fold on its own rows; held-out rows only ever see
the training statistics.  A cell whose fit raises contributes the MSE of the
training-mean predictor for that fold, so the grid never holds NaN.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy import stats

from .admm import lambda_max
from .data import CenteredData, Dataset, FoldAssignment, center_columns
from .errors import DataValidationError, FoldSplitError, SparsePlsError
from .logging_utils import log_event, set_fold_id, set_method
from .methods import FittedModel, MethodConfig, fit_method
from .pls import transform
from .settings import AdmmOptions, get_settings

MseMode = Literal["mean", "sum"]


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def _as_pair(Y: np.ndarray, Yhat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Y = np.asarray(Y, dtype=float)
    Yhat = np.asarray(Yhat, dtype=float)
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    if Yhat.ndim == 1:
        Yhat = Yhat.reshape(-1, 1)
    if Y.shape != Yhat.shape:
        raise DataValidationError(f"shape mismatch: Y{Y.shape} vs Yhat{Yhat.shape}")
    if Y.shape[0] < 1:
        raise DataValidationError("need at least one row")
    return Y, Yhat


def per_response_mse(Y: np.ndarray, Yhat: np.ndarray) -> np.ndarray:
    Y, Yhat = _as_pair(Y, Yhat)
    return np.mean((Y - Yhat) ** 2, axis=0)


def mse(Y: np.ndarray, Yhat: np.ndarray, mode: MseMode = "mean") -> float:
    """Mean squared error over all entries, or the sum of per-response MSEs."""
    if mode == "sum":
        return float(per_response_mse(Y, Yhat).sum())
    Y, Yhat = _as_pair(Y, Yhat)
    return float(np.mean((Y - Yhat) ** 2))


def r_squared(Y: np.ndarray, Yhat: np.ndarray) -> float:
    Y, Yhat = _as_pair(Y, Yhat)
    ss_tot = float(np.sum((Y - Y.mean(axis=0)) ** 2))
    if ss_tot == 0.0:
        raise DataValidationError("R^2 is undefined for a zero-variance response")
    return 1.0 - float(np.sum((Y - Yhat) ** 2)) / ss_tot


def paired_t_test_one_sided(a: Sequence[float], b: Sequence[float]) -> float:
    """Lower-tail p-value for H1: mean(a - b) < 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DataValidationError("paired samples must be vectors of equal length")
    if a.size < 2:
        raise DataValidationError("a paired t-test needs at least two pairs")
    d = a - b
    mean = float(d.mean())
    if float(d.std(ddof=1)) == 0.0:
        if mean == 0.0:
            return 0.5
        return 0.0 if mean < 0 else 1.0
    return float(stats.ttest_rel(a, b, alternative="less").pvalue)


def latent_response_correlation(model: FittedModel, data: Dataset) -> list[float]:
    """Correlation of each latent score with the row sums of the responses."""
    inner = getattr(model, "model", model)
    if inner.K == 0:
        return []
    T = transform(inner, data.X)
    total = data.Y.sum(axis=1)
    out = []
    for k in range(T.shape[1]):
        t = T[:, k]
        if t.std() == 0.0 or total.std() == 0.0:
            out.append(0.0)
        else:
            out.append(float(np.corrcoef(t, total)[0, 1]))
    return out


def selection_frequency(masks: Sequence[np.ndarray]) -> np.ndarray:
    """Per-variable count of selections across trials."""
    if not masks:
        return np.zeros(0, dtype=int)
    return np.sum(np.vstack([np.asarray(m, dtype=bool) for m in masks]), axis=0).astype(int)


def support_fraction(selected: np.ndarray, beta_true: np.ndarray | None) -> float | None:
    """Share of selected variables that carry a nonzero true coefficient."""
    if beta_true is None or not np.any(selected):
        return None
    support = np.any(beta_true != 0.0, axis=1)
    return float(np.mean(support[np.asarray(selected, dtype=bool)]))


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CvResult:
    grid_K: tuple[int, ...]
    grid_lambda: tuple[float, ...]
    cv_mse: np.ndarray
    best_K: int
    best_lambda: float
    folds: FoldAssignment
    fold_mse: np.ndarray | None = None
    failed_cells: int = 0


def default_lambda_grid(
    Xc: np.ndarray,
    Yc: np.ndarray,
    K: int,
    opts: AdmmOptions | None = None,
    *,
    points: int | None = None,
    ratio: float | None = None,
) -> list[float]:
    """Log-spaced grid from ratio * lambda_max to lambda_max."""
    cfg = get_settings().cv
    points = cfg.lambda_points if points is None else points
    ratio = cfg.lambda_ratio if ratio is None else ratio
    top = lambda_max(Xc, Yc, K, opts)
    if top <= 0.0:
        return [0.0]
    if points == 1:
        return [top]
    return [float(v) for v in np.geomspace(ratio * top, top, points)]


def select_best(grid_K: Sequence[int], grid_lambda: Sequence[float], cv_mse: np.ndarray) -> tuple[int, float]:
    """Minimal cell; ties go to the smaller K, then the larger lambda."""
    best_val = float(np.min(cv_mse))
    for i in np.argsort(np.asarray(grid_K), kind="stable"):
        for j in np.argsort(-np.asarray(grid_lambda, dtype=float), kind="stable"):
            if cv_mse[i, j] == best_val:
                return int(grid_K[i]), float(grid_lambda[j])
    raise RuntimeError("unreachable: minimum not found in grid")


def fold_centering(data: Dataset, folds: FoldAssignment, fold: int, scale: bool = False) -> CenteredData:
    """Centering computed from the training rows of one fold only."""
    train, _ = folds.train_test(fold)
    if train.size < 2:
        raise FoldSplitError(f"fold {fold} leaves {train.size} training row(s); need at least 2")
    return center_columns(data.subset(train), scale=scale)


def _evaluate_fold(
    data: Dataset,
    method: MethodConfig,
    grid_K: Sequence[int],
    grid_lambda: Sequence[float],
    folds: FoldAssignment,
    fold: int,
    scale: bool,
    mse_mode: MseMode,
) -> tuple[np.ndarray, int]:
    set_method(method.name)
    set_fold_id(fold)
    try:
        cd = fold_centering(data, folds, fold, scale)
        _, test = folds.train_test(fold)
        X_test, Y_test = data.X[test], data.Y[test]
        fallback = mse(Y_test, np.broadcast_to(cd.y_mean, Y_test.shape), mse_mode)
        out = np.empty((len(grid_K), len(grid_lambda)))
        failures = 0
        for i, K in enumerate(grid_K):
            for j, lam in enumerate(grid_lambda):
                try:
                    model = fit_method(method, cd.Xc, cd.Yc, int(K), float(lam), centering=cd.stats)
                    out[i, j] = mse(Y_test, model.predict(X_test), mse_mode)
                except (SparsePlsError, np.linalg.LinAlgError) as exc:
                    failures += 1
                    out[i, j] = fallback
                    log_event("cv_cell_failed", level="warning", K=int(K), lam=float(lam), error=str(exc))
        return out, failures
    finally:
        set_fold_id(None)


def cross_validate(
    data: Dataset,
    method: MethodConfig,
    grid_K: Sequence[int],
    grid_lambda: Sequence[float] | None,
    folds: FoldAssignment,
    *,
    scale: bool = False,
    mse_mode: MseMode = "mean",
    threads: int = 1,
) -> CvResult:
    if not grid_K:
        raise DataValidationError("grid_K must not be empty")
    if any(int(K) < 1 for K in grid_K):
        raise DataValidationError("component counts must be >= 1")
    if folds.n != data.n:
        raise FoldSplitError(f"fold assignment covers {folds.n} rows, data has {data.n}")
    if method.uses_lambda:
        if not grid_lambda:
            raise DataValidationError(f"{method.name} needs a non-empty lambda grid")
        lambdas = tuple(float(v) for v in grid_lambda)
    else:
        lambdas = (0.0,)
    Ks = tuple(int(K) for K in grid_K)

    def run(fold: int) -> tuple[np.ndarray, int]:
        return _evaluate_fold(data, method, Ks, lambdas, folds, fold, scale, mse_mode)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(folds.k)))
    else:
        results = [run(f) for f in range(folds.k)]

    fold_mse = np.stack([r[0] for r in results])
    cv = fold_mse.mean(axis=0)
    best_K, best_lambda = select_best(Ks, lambdas, cv)
    failed = sum(r[1] for r in results)
    log_event("cv_done", level="debug", method=method.name, best_K=best_K, best_lambda=best_lambda,
              failed_cells=failed)
    return CvResult(grid_K=Ks, grid_lambda=lambdas, cv_mse=cv, best_K=best_K, best_lambda=best_lambda,
                    folds=folds, fold_mse=fold_mse, failed_cells=failed)
