"""
errors.py - Exception hierarchy for the sparse PLS toolkit.

Every failure raised by library code derives from SparsePlsError so callers
(the CLI, the CV loop, the experiment runner) can catch one type and record
the failure instead of crashing a whole batch.
"""
from __future__ import annotations


class SparsePlsError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SparsePlsError):
    """Invalid experiment configuration or unusable input paths."""


class DataValidationError(SparsePlsError, ValueError):
    """Matrices that break a container invariant (shape, finiteness, labels)."""


class CsvParseError(DataValidationError):
    def __init__(self, message: str, *, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class FoldSplitError(SparsePlsError, ValueError):
    """Fold count incompatible with the number of rows or subjects."""


class RankDeficiencyError(SparsePlsError):
    """More components were requested than the data can support."""

    def __init__(self, message: str, *, requested: int, achievable: int):
        self.requested = requested
        self.achievable = achievable
        super().__init__(f"{message}: requested K={requested}, largest achievable K={achievable}")


class DegenerateResponseError(RankDeficiencyError):
    """The centered response is identically zero."""


class ConvergenceError(SparsePlsError):
    def __init__(self, message: str, *, component: int | None = None, residual: float | None = None):
        self.component = component
        self.residual = residual
        extra = []
        if component is not None:
            extra.append(f"component={component}")
        if residual is not None:
            extra.append(f"residual={residual:.3e}")
        super().__init__(f"{message} ({', '.join(extra)})" if extra else message)


class ResolventError(SparsePlsError, ValueError):
    """The shifted matrix (A - alpha I) is singular or indefinite at alpha."""


class ComplementExhaustedError(SparsePlsError):
    """No feasible direction remains orthogonal to the conjugacy constraints."""

    def __init__(self, message: str, *, achievable: int):
        self.achievable = achievable
        super().__init__(f"{message}: largest achievable K={achievable}")
