"""
schemas.py - Pydantic records for every JSON artifact the toolkit writes.

Design rules:
  1. Matrices are row-major nested lists of floats; shapes are recovered from
     the component count and centering vectors, never from list lengths alone.
  2. Every record has a from_* classmethod building it from the in-memory
     result and, where a round trip is useful, a to_* method rebuilding it.
  3. Config models reject unknown keys so a typo in a JSON config fails at
     validation time instead of silently falling back to a default.
  4. Reports hold no wall-clock timestamps; with timings disabled the same
     config and seed serialize to identical bytes.
"""
from __future__ import annotations

from pathlib import Path
from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .admm import FitDiagnostics, SparsePlsModel
from .data import CenteringStats, FoldAssignment
from .methods import METHOD_NAMES, MethodName
from .pls import PlsModel
from .selection import CvResult
from .settings import AdmmOptions
from .simgen import SimModelSpec, check_dimensions

Matrix = list[list[float]]


def _matrix(values: Matrix, cols: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 2:
        return arr
    # An empty outer list carries no column count.
    return arr.reshape(len(values), cols)


# ---------------------------------------------------------------------------
# Fitted models
# ---------------------------------------------------------------------------

class CenteringRecord(BaseModel):
    x_mean: list[float]
    y_mean: list[float]
    x_scale: list[float] | None = None

    @classmethod
    def from_stats(cls, stats: CenteringStats) -> CenteringRecord:
        return cls(
            x_mean=stats.x_mean.tolist(),
            y_mean=stats.y_mean.tolist(),
            x_scale=None if stats.x_scale is None else stats.x_scale.tolist(),
        )

    def to_stats(self) -> CenteringStats:
        return CenteringStats(x_mean=np.asarray(self.x_mean), y_mean=np.asarray(self.y_mean),
                              x_scale=None if self.x_scale is None else np.asarray(self.x_scale))


class PlsModelRecord(BaseModel):
    algorithm: Literal["nipals", "simpls"]
    K: Annotated[int, Field(ge=0)]
    W: Matrix
    T: Matrix
    P: Matrix
    Q: Matrix
    beta: Matrix
    centering: CenteringRecord
    diagnostics: list[str] = []

    @classmethod
    def from_model(cls, model: PlsModel) -> PlsModelRecord:
        return cls(
            algorithm=model.algorithm,
            K=model.K,
            W=model.W.tolist(),
            T=model.T.tolist(),
            P=model.P.tolist(),
            Q=model.Q.tolist(),
            beta=model.beta.tolist(),
            centering=CenteringRecord.from_stats(model.centering),
            diagnostics=list(model.diagnostics),
        )

    def to_model(self) -> PlsModel:
        q = len(self.centering.y_mean)
        return PlsModel(
            W=_matrix(self.W, self.K),
            T=_matrix(self.T, self.K),
            P=_matrix(self.P, self.K),
            Q=_matrix(self.Q, self.K),
            beta=_matrix(self.beta, q),
            K=self.K,
            centering=self.centering.to_stats(),
            algorithm=self.algorithm,
            diagnostics=tuple(self.diagnostics),
        )


class FitDiagnosticsRecord(BaseModel):
    iterations: int
    final_residual: float
    converged: bool
    mu_final: float | None = None
    notes: list[str] = []

    @classmethod
    def from_diagnostics(cls, diag: FitDiagnostics) -> FitDiagnosticsRecord:
        return cls(iterations=diag.iterations, final_residual=diag.final_residual, converged=diag.converged,
                   mu_final=diag.mu_final, notes=list(diag.notes))


class SparsePlsRecord(BaseModel):
    method: str
    lam: float
    K: int
    selected: list[bool]
    model: PlsModelRecord
    diagnostics: FitDiagnosticsRecord

    @classmethod
    def from_model(cls, fit: SparsePlsModel) -> SparsePlsRecord:
        return cls(
            method=fit.method,
            lam=fit.lam,
            K=fit.K,
            selected=[bool(s) for s in fit.selected],
            model=PlsModelRecord.from_model(fit.model),
            diagnostics=FitDiagnosticsRecord.from_diagnostics(fit.diagnostics),
        )


class FoldAssignmentRecord(BaseModel):
    k: int
    seed: int
    fold_of: list[int]

    @classmethod
    def from_folds(cls, folds: FoldAssignment) -> FoldAssignmentRecord:
        return cls(**folds.to_dict())

    def to_folds(self) -> FoldAssignment:
        return FoldAssignment.from_dict(self.model_dump())


class CvResultRecord(BaseModel):
    method: str
    grid_K: list[int]
    grid_lambda: list[float]
    cv_mse: Matrix
    best_K: int
    best_lambda: float
    failed_cells: int = 0
    folds: FoldAssignmentRecord

    @classmethod
    def from_result(cls, method: str, cv: CvResult) -> CvResultRecord:
        return cls(
            method=method,
            grid_K=list(cv.grid_K),
            grid_lambda=list(cv.grid_lambda),
            cv_mse=cv.cv_mse.tolist(),
            best_K=cv.best_K,
            best_lambda=cv.best_lambda,
            failed_cells=cv.failed_cells,
            folds=FoldAssignmentRecord.from_folds(cv.folds),
        )


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------

class SimSource(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["sim"] = "sim"
    model_id: Literal[1, 2, 3, 4] = 1
    n: Annotated[int, Field(ge=4)] = 100
    p: int = 5000
    # Size of the independent test set; defaults to n.
    n_test: Annotated[int, Field(ge=4)] | None = None

    @model_validator(mode="after")
    def blocks_fit(self) -> SimSource:
        check_dimensions(self.model_id, self.p)
        return self

    def spec(self, seed: int, *, test: bool = False) -> SimModelSpec:
        n = self.n_test if test and self.n_test is not None else self.n
        return SimModelSpec(model_id=self.model_id, n=n, p=self.p, seed=seed)


class CsvSource(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["csv"] = "csv"
    x_path: str
    y_path: str
    has_header: bool = True
    subjects_path: str | None = None
    protocol: Literal["random_split", "leave_one_subject_out"] = "random_split"
    test_fraction: Annotated[float, Field(gt=0.0, lt=1.0)] = 1.0 / 3.0

    @model_validator(mode="after")
    def files_exist(self) -> CsvSource:
        missing = [p for p in (self.x_path, self.y_path, self.subjects_path) if p and not Path(p).is_file()]
        if missing:
            raise ValueError(f"input file(s) not found: {', '.join(missing)}")
        if self.protocol == "leave_one_subject_out" and not self.subjects_path:
            raise ValueError("leave_one_subject_out needs subjects_path")
        return self


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: SimSource | CsvSource = Field(default_factory=SimSource, discriminator="kind")
    methods: list[MethodName] = ["simpls", "global_simpls"]
    k_grid: list[int] = [1, 2, 3]
    # Global-penalty grid; relative values multiply lambda_max of each training set.
    lambda_grid: list[float] | None = None
    lambda_mode: Literal["relative", "absolute"] = "relative"
    l1_lambda_grid: list[float] | None = None
    folds: Annotated[int, Field(ge=2)] = 10
    seed: Annotated[int, Field(ge=0)] = 0
    trials: Annotated[int, Field(ge=1)] = 10
    threads: Annotated[int, Field(ge=1)] = 1
    out: str | None = None
    scale: bool = False
    mse_mode: Literal["mean", "sum"] = "mean"
    admm: AdmmOptions = Field(default_factory=AdmmOptions)
    kappa: Annotated[float, Field(gt=0.0, lt=0.5)] = 0.5 - 1e-6
    record_timings: bool = False

    @field_validator("methods")
    @classmethod
    def unique_methods(cls, v: list[str]) -> list[str]:
        if not v:
            raise ValueError("at least one method is required")
        if len(set(v)) != len(v):
            raise ValueError("methods must not repeat")
        return v

    @field_validator("k_grid")
    @classmethod
    def positive_components(cls, v: list[int]) -> list[int]:
        if not v or any(k < 1 for k in v):
            raise ValueError("k_grid needs at least one value, all >= 1")
        return v

    @field_validator("lambda_grid", "l1_lambda_grid")
    @classmethod
    def non_negative_lambdas(cls, v: list[float] | None) -> list[float] | None:
        if v is not None and (not v or any(x < 0 for x in v)):
            raise ValueError("lambda grids must be non-empty and non-negative")
        return v


# ---------------------------------------------------------------------------
# Experiment report
# ---------------------------------------------------------------------------

class TrialRow(BaseModel):
    trial: int
    method: str
    failed: bool = False
    error: str | None = None
    best_K: int | None = None
    best_lambda: float | None = None
    n_components: int | None = None
    n_selected: int | None = None
    test_mse: float | None = None
    per_response_mse: list[float] = []
    train_r2: float | None = None
    support_fraction: float | None = None
    latent_correlations: list[float] = []
    selected: list[int] = []
    cv_seconds: float | None = None
    fit_seconds: float | None = None
    predict_seconds: float | None = None


class MethodAggregate(BaseModel):
    method: str
    n_success: int
    n_failed: int
    mean_components: float | None = None
    mean_selected: float | None = None
    mean_test_mse: float | None = None
    mean_train_r2: float | None = None
    mean_support_fraction: float | None = None
    mean_seconds: float | None = None


class PairwiseTest(BaseModel):
    method_a: str
    method_b: str
    metric: Literal["components", "variables", "mse"]
    n: int
    p_value: float | None = None


class Provenance(BaseModel):
    version: str
    run_id: str
    seeds: list[int]
    n_variables: int
    config: dict


class ExperimentReport(BaseModel):
    aggregates: list[MethodAggregate]
    pairwise: list[PairwiseTest]
    rows: list[TrialRow]
    provenance: Provenance

    @property
    def all_failed(self) -> bool:
        return bool(self.rows) and all(r.failed for r in self.rows)

    def aggregate(self, method: str) -> MethodAggregate:
        for agg in self.aggregates:
            if agg.method == method:
                return agg
        raise KeyError(method)


__all__ = [
    "METHOD_NAMES",
    "CenteringRecord",
    "PlsModelRecord",
    "FitDiagnosticsRecord",
    "SparsePlsRecord",
    "FoldAssignmentRecord",
    "CvResultRecord",
    "SimSource",
    "CsvSource",
    "ExperimentConfig",
    "TrialRow",
    "MethodAggregate",
    "PairwiseTest",
    "Provenance",
    "ExperimentReport",
]
