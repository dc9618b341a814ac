"""
data.py - Matrix containers, centering, CSV ingestion and fold bookkeeping.

Design rules:
  1. Containers are frozen dataclasses whose arrays are copied and marked
     read-only on construction, so a Dataset can be handed to worker threads
     without defensive copies.
  2. CSV is the only on-disk format: comma separator, '.' decimal, optional
     single header row.  Values are written at 17 significant digits so a
     save/load round trip is bit-exact.
  3. Centering statistics travel with every fitted model; prediction never
     recomputes them from new data.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd

from .errors import CsvParseError, DataValidationError, FoldSplitError
from .logging_utils import log_event


def _frozen(a: Any, *, ndim: int = 2) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if ndim == 2 and arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    subject_ids: tuple[str, ...] | None = None
    beta_true: np.ndarray | None = None
    x_names: tuple[str, ...] | None = None
    y_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        X = _frozen(self.X)
        Y = _frozen(self.Y)
        if X.ndim != 2 or Y.ndim != 2:
            raise DataValidationError("X and Y must be two-dimensional")
        n, p = X.shape
        if Y.shape[0] != n:
            raise DataValidationError(f"X has {n} rows but Y has {Y.shape[0]}")
        if n < 2:
            raise DataValidationError("at least two samples are required")
        if p < 1 or Y.shape[1] < 1:
            raise DataValidationError("X and Y need at least one column each")
        if not (np.isfinite(X).all() and np.isfinite(Y).all()):
            raise DataValidationError("X and Y must contain only finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

        if self.subject_ids is not None:
            ids = tuple(str(s) for s in self.subject_ids)
            if len(ids) != n:
                raise DataValidationError(f"subject_ids has {len(ids)} labels for {n} rows")
            object.__setattr__(self, "subject_ids", ids)

        if self.beta_true is not None:
            beta = _frozen(self.beta_true)
            if beta.shape != (p, Y.shape[1]):
                raise DataValidationError(
                    f"beta_true has shape {beta.shape}, expected {(p, Y.shape[1])}"
                )
            object.__setattr__(self, "beta_true", beta)

        for attr, width in (("x_names", p), ("y_names", Y.shape[1])):
            names = getattr(self, attr)
            if names is not None:
                names = tuple(str(s) for s in names)
                if len(names) != width:
                    raise DataValidationError(f"{attr} has {len(names)} entries for {width} columns")
                object.__setattr__(self, attr, names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Y.shape[1]

    def subset(self, rows: Sequence[int] | np.ndarray) -> Dataset:
        """Row subset keeping labels, ground truth and names."""
        idx = np.asarray(rows, dtype=int)
        subjects = None
        if self.subject_ids is not None:
            subjects = tuple(self.subject_ids[i] for i in idx)
        return Dataset(
            X=self.X[idx],
            Y=self.Y[idx],
            subject_ids=subjects,
            beta_true=self.beta_true,
            x_names=self.x_names,
            y_names=self.y_names,
        )


@dataclass(frozen=True)
class CenteringStats:
    """Per-column statistics needed to map raw rows into the model's frame."""

    x_mean: np.ndarray
    y_mean: np.ndarray
    x_scale: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "x_mean", _frozen(self.x_mean, ndim=1))
        object.__setattr__(self, "y_mean", _frozen(self.y_mean, ndim=1))
        if self.x_scale is not None:
            scale = _frozen(self.x_scale, ndim=1)
            if scale.shape != self.x_mean.shape or not (scale > 0).all():
                raise DataValidationError("x_scale must be positive with one entry per column")
            object.__setattr__(self, "x_scale", scale)

    @classmethod
    def identity(cls, p: int, q: int) -> CenteringStats:
        return cls(x_mean=np.zeros(p), y_mean=np.zeros(q))

    def transform_x(self, X: np.ndarray) -> np.ndarray:
        Xc = np.asarray(X, dtype=float) - self.x_mean
        if self.x_scale is not None:
            Xc = Xc / self.x_scale
        return Xc

    def restrict(self, columns: np.ndarray) -> CenteringStats:
        """Statistics for a column subset (boolean mask or index array)."""
        return CenteringStats(
            x_mean=self.x_mean[columns],
            y_mean=self.y_mean,
            x_scale=None if self.x_scale is None else self.x_scale[columns],
        )


@dataclass(frozen=True)
class CenteredData:
    Xc: np.ndarray
    Yc: np.ndarray
    x_mean: np.ndarray
    y_mean: np.ndarray
    x_scale: np.ndarray | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for attr in ("Xc", "Yc"):
            object.__setattr__(self, attr, _frozen(getattr(self, attr)))
        object.__setattr__(self, "x_mean", _frozen(self.x_mean, ndim=1))
        object.__setattr__(self, "y_mean", _frozen(self.y_mean, ndim=1))
        if self.x_scale is not None:
            object.__setattr__(self, "x_scale", _frozen(self.x_scale, ndim=1))

    @property
    def stats(self) -> CenteringStats:
        return CenteringStats(x_mean=self.x_mean, y_mean=self.y_mean, x_scale=self.x_scale)


@dataclass(frozen=True)
class FoldAssignment:
    fold_of: np.ndarray
    k: int
    seed: int
    subject_wise: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        fold_of = np.array(self.fold_of, dtype=int, copy=True)
        fold_of.setflags(write=False)
        if fold_of.ndim != 1:
            raise FoldSplitError("fold_of must be a vector")
        if self.k < 2:
            raise FoldSplitError(f"need at least 2 folds, got k={self.k}")
        if fold_of.size and (fold_of.min() < 0 or fold_of.max() >= self.k):
            raise FoldSplitError("fold indices must lie in 0..k-1")
        missing = sorted(set(range(self.k)) - set(fold_of.tolist()))
        if missing:
            raise FoldSplitError(f"folds {missing} are empty")
        object.__setattr__(self, "fold_of", fold_of)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FoldAssignment):
            return NotImplemented
        return self.k == other.k and self.seed == other.seed and np.array_equal(self.fold_of, other.fold_of)

    @property
    def n(self) -> int:
        return int(self.fold_of.size)

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = np.flatnonzero(self.fold_of == fold)
        train = np.flatnonzero(self.fold_of != fold)
        return train, test

    def to_dict(self) -> dict:
        return {"k": int(self.k), "seed": int(self.seed), "fold_of": [int(f) for f in self.fold_of]}

    @classmethod
    def from_dict(cls, payload: dict) -> FoldAssignment:
        return cls(fold_of=np.asarray(payload["fold_of"], dtype=int), k=int(payload["k"]), seed=int(payload["seed"]))


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CsvMatrix:
    values: np.ndarray
    names: tuple[str, ...] | None = None


_PANDAS_LINE = re.compile(r"line (\d+)")


def load_csv(path: str | Path, has_header: bool = False) -> CsvMatrix:
    """
    Parse a rectangular numeric CSV file.

    Raises CsvParseError carrying the 1-based file line of the first ragged
    row, and the line plus 1-based column of the first non-numeric cell.
    """
    path = Path(path)
    offset = 1 if has_header else 0
    try:
        frame = pd.read_csv(
            path,
            header=0 if has_header else None,
            dtype=str,
            keep_default_na=False,
            na_values=[""],
            skip_blank_lines=False,
        )
    except pd.errors.EmptyDataError as exc:
        raise CsvParseError(f"{path}: file is empty") from exc
    except pd.errors.ParserError as exc:
        m = _PANDAS_LINE.search(str(exc))
        raise CsvParseError(f"{path}: ragged row", line=int(m.group(1)) if m else None) from exc

    # Blank lines read as all-missing rows; only trailing ones are allowed.
    present = frame.notna().any(axis=1).to_numpy()
    frame = frame.iloc[: int(np.flatnonzero(present)[-1]) + 1] if present.any() else frame.iloc[:0]
    if frame.shape[0] == 0:
        raise CsvParseError(f"{path}: no data rows")

    # Short rows are padded with missing cells.
    missing = np.argwhere(frame.isna().to_numpy())
    if missing.size:
        row, col = (int(v) for v in missing[0])
        raise CsvParseError(f"{path}: ragged row or empty cell", line=row + 1 + offset, column=col + 1)

    raw = frame.to_numpy(dtype=str)
    try:
        values = raw.astype(float)
    except ValueError:
        coerced = frame.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
        bad = np.argwhere(coerced.isna().to_numpy())
        if bad.size == 0:
            raise CsvParseError(f"{path}: unparseable numeric body") from None
        row, col = (int(v) for v in bad[0])
        raise CsvParseError(
            f"{path}: non-numeric cell {raw[row, col]!r}", line=row + 1 + offset, column=col + 1
        ) from None

    if not np.isfinite(values).all():
        row, col = (int(v) for v in np.argwhere(~np.isfinite(values))[0])
        raise CsvParseError(f"{path}: non-finite value", line=row + 1 + offset, column=col + 1)

    names = tuple(str(c) for c in frame.columns) if has_header else None
    values.setflags(write=False)
    return CsvMatrix(values=values, names=names)


def save_csv(path: str | Path, values: np.ndarray, names: Sequence[str] | None = None) -> None:
    """Write a matrix at 17 significant digits so load_csv reproduces it exactly."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    frame = pd.DataFrame(arr, columns=list(names) if names is not None else None)
    frame.to_csv(Path(path), index=False, header=names is not None, float_format="%.17g")


def load_subjects(path: str | Path, has_header: bool = False) -> tuple[str, ...]:
    """Single-column label file, read as strings."""
    frame = pd.read_csv(Path(path), header=0 if has_header else None, dtype=str, keep_default_na=False)
    if frame.shape[1] != 1:
        raise CsvParseError(f"{path}: expected one column of subject labels, found {frame.shape[1]}")
    return tuple(frame.iloc[:, 0].str.strip().tolist())


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------

def center_columns(data: Dataset, scale: bool = False) -> CenteredData:
    """Subtract column means; optionally divide X columns by their n-1 sample sd."""
    x_mean = data.X.mean(axis=0)
    y_mean = data.Y.mean(axis=0)
    Xc = data.X - x_mean
    Yc = data.Y - y_mean
    x_scale = None
    warnings: list[str] = []
    if scale:
        x_scale = Xc.std(axis=0, ddof=1)
        constant = ~(x_scale > 0)
        if constant.any():
            cols = np.flatnonzero(constant)
            x_scale[constant] = 1.0
            msg = f"{cols.size} constant predictor column(s) left unscaled"
            warnings.append(msg)
            log_event("constant_columns_unscaled", level="warning", count=int(cols.size),
                      first_columns=cols[:10].tolist())
        Xc = Xc / x_scale
    return CenteredData(Xc=Xc, Yc=Yc, x_mean=x_mean, y_mean=y_mean, x_scale=x_scale,
                        warnings=tuple(warnings))


def apply_centering(stats: CenteringStats, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Map a held-out dataset into a training frame."""
    return stats.transform_x(data.X), data.Y - stats.y_mean


def split_folds(n: int, k: int, seed: int, subject_ids: Sequence[str] | None = None) -> FoldAssignment:
    """
    Seeded shuffle of units (rows, or subjects in first-appearance order)
    followed by round-robin assignment to k folds.
    """
    if subject_ids is not None:
        if len(subject_ids) != n:
            raise FoldSplitError(f"{len(subject_ids)} subject labels for {n} rows")
        codes, units = pd.factorize(pd.Series(list(subject_ids), dtype=str))
        n_units = len(units)
    else:
        codes = np.arange(n)
        n_units = n
    if k < 2:
        raise FoldSplitError(f"need at least 2 folds, got k={k}")
    if k > n_units:
        what = "subjects" if subject_ids is not None else "rows"
        raise FoldSplitError(f"k={k} exceeds the {n_units} distinct {what}")

    order = np.random.default_rng(seed).permutation(n_units)
    unit_fold = np.empty(n_units, dtype=int)
    unit_fold[order] = np.arange(n_units) % k
    return FoldAssignment(fold_of=unit_fold[np.asarray(codes)], k=k, seed=seed,
                          subject_wise=subject_ids is not None)
