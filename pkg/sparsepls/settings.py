from pathlib import Path

from pydantic import BaseModel, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

BASE_DIR = Path(__file__).resolve().parent.parent


# ---------------------------------------------------------------------------
# Numerical tuning knobs - all magic numbers live here, nowhere else.
# ---------------------------------------------------------------------------

class SolverConfig(BaseModel):
    """
    Tolerances for the sphere-constrained quadratic solver.

    The secular iteration starts at d_min - eps1 with
    eps1 = secular_eps1_rel * max(1, |d_min|) and stops once |g(alpha) - 1|
    drops below secular_eps2.
    """

    secular_eps1_rel: float = 1e-3
    secular_eps2: float = 1e-10
    secular_max_iter: int = 200

    # Contact of b with the bottom eigenspace below this fraction of ||b||
    # is treated as zero when testing for the hard case.
    hard_case_rel_tol: float = 1e-10

    # Eigenvalues of G'G below rank_rel_tol * max eigenvalue count as zero.
    rank_rel_tol: float = 1e-12

    gram_schmidt_tol: float = 1e-10


class PlsConfig(BaseModel):
    nipals_tol: float = 1e-10
    nipals_max_iter: int = 500
    # Projected cross-product below this fraction of ||Xc'Yc|| ends extraction.
    degenerate_rel_tol: float = 1e-12


class AdmmOptions(BaseModel):
    """Augmented-Lagrangian schedule for the jointly sparse fit."""

    mu0: float = Field(default=2000.0, gt=0)
    mu_growth: float = Field(default=1.01, ge=1.0)
    eps: float = Field(default=1e-4, gt=0)
    max_iter: int = Field(default=500, ge=1)
    # Rescale the scaled dual by mu_old / mu_new whenever mu grows.  Off
    # reproduces the literal scaled-form iteration.
    dual_rescale: bool = True


class L1Defaults(BaseModel):
    kappa: float = 0.5 - 1e-6
    max_outer: int = 100
    tol: float = 1e-6


class CvConfig(BaseModel):
    folds: int = 10
    # Default global-penalty grid: lambda_points log-spaced values in
    # [lambda_ratio * lambda_max, lambda_max].
    lambda_points: int = 8
    lambda_ratio: float = 1e-4
    l1_lambda_grid: list[float] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]

    @field_validator("lambda_points")
    @classmethod
    def at_least_one_point(cls, v: int) -> int:
        if v < 1:
            raise ValueError("lambda_points must be >= 1")
        return v


class Settings(BaseSettings):
    log_level: str = "INFO"
    threads: int = 1

    # Nested tuning groups.  Sub-fields are overridable from the environment,
    # e.g. SPARSEPLS_ADMM__MU0=500.
    solver: SolverConfig = SolverConfig()
    pls: PlsConfig = PlsConfig()
    admm: AdmmOptions = AdmmOptions()
    l1: L1Defaults = L1Defaults()
    cv: CvConfig = CvConfig()

    model_config = SettingsConfigDict(
        env_prefix="SPARSEPLS_",
        env_nested_delimiter="__",
        env_file=str(BASE_DIR / ".env"),
        env_file_encoding="utf-8",
        extra="ignore",
    )

    @field_validator("log_level")
    @classmethod
    def known_level(cls, v: str) -> str:
        level = v.strip().upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level {v!r}")
        return level

    @field_validator("threads")
    @classmethod
    def positive_threads(cls, v: int) -> int:
        if v < 1:
            raise ValueError("threads must be >= 1")
        return v


_settings_instance: Settings | None = None


def get_settings() -> Settings:
    global _settings_instance
    if _settings_instance is None:
        _settings_instance = Settings()
    return _settings_instance


def reset_settings() -> None:
    """Drop the cached instance so the next get_settings() re-reads the environment."""
    global _settings_instance
    _settings_instance = None
