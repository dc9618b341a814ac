"""
simgen.py - The four latent-component simulation designs.

Each predictor block j in (p_{k-1}, p_k] is a hidden component H_k plus
standard normal noise; only the first 50 variables enter the response.
Model 4 prepends 50 AR(1) Gaussian columns carrying a graded coefficient
profile.

Random streams: SeedSequence(seed).spawn(4) gives independent generators for
(uniform indicators, per-column noise, response noise, AR block).  Noise is
drawn column by column, n values per column, so column j of the latent
blocks sees draws j*n .. (j+1)*n - 1 of its stream and widening p only
appends columns.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg
from pydantic import BaseModel, Field, model_validator

from .data import Dataset
from .errors import DataValidationError

_MIN_P = {1: 50, 2: 300, 3: 300, 4: 350}
_AR_WIDTH = 50
_AR_RHO = 0.9


class SimModelSpec(BaseModel):
    model_id: Literal[1, 2, 3, 4] = 1
    n: int = Field(default=100, ge=4)
    p: int = 5000
    seed: int = 0

    @model_validator(mode="after")
    def blocks_fit(self) -> "SimModelSpec":
        check_dimensions(self.model_id, self.p)
        return self


def check_dimensions(model_id: int, p: int) -> None:
    """Raise ValueError unless the informative blocks of model_id fit in p columns."""
    if model_id not in _MIN_P:
        raise ValueError(f"unknown model {model_id}")
    if p <= _MIN_P[model_id]:
        raise ValueError(f"model {model_id} needs p > {_MIN_P[model_id]}, got p={p}")


@dataclass(frozen=True)
class Simulation:
    data: Dataset
    latent: np.ndarray      # n x (number of hidden components)
    uniforms: np.ndarray    # n x 3 indicator draws u1, u2, u3
    boundaries: tuple[int, ...]


def ar1_covariance_factor(rho: float, size: int) -> np.ndarray:
    """Lower Cholesky factor L with LL' = [rho^|i-j|]."""
    if not abs(rho) < 1.0:
        raise DataValidationError(f"AR(1) coefficient must satisfy |rho| < 1, got {rho}")
    if size < 1:
        raise DataValidationError(f"size must be >= 1, got {size}")
    sigma = scipy.linalg.toeplitz(rho ** np.arange(size))
    return scipy.linalg.cholesky(sigma, lower=True)


def _indicator_components(u: np.ndarray) -> list[np.ndarray]:
    return [
        3.5 + 1.5 * (u[:, 0] <= 0.4),
        3.5 + 0.5 * (u[:, 1] <= 0.7),
        3.5 - 1.5 * (u[:, 2] <= 0.3),
    ]


def _latents(spec: SimModelSpec, u: np.ndarray) -> tuple[list[np.ndarray], tuple[int, ...]]:
    n, p = spec.n, spec.p
    i = np.arange(1, n + 1)
    half = n // 2
    quarter = n // 4
    first_half = i <= half
    const = np.full(n, 3.5)

    if spec.model_id == 1:
        return [np.where(first_half, 3.0, 4.0), const], (0, 50, p)
    if spec.model_id == 2:
        return [np.where(first_half, 2.5, 4.0), *_indicator_components(u), const], (0, 50, 100, 200, 300, p)
    if spec.model_id == 3:
        low = (i <= quarter) | ((i > half) & (i <= half + quarter))
        return ([np.where(first_half, 2.5, 4.0), np.where(low, 2.5, 4.0), *_indicator_components(u), const],
                (0, 25, 50, 100, 200, 300, p))
    # Model 4: latent blocks index the columns after the AR block.
    return ([np.where(first_half, 1.0, 6.0), *_indicator_components(u), const],
            (0, 50, 100, 200, 300, p - _AR_WIDTH))


def _beta(spec: SimModelSpec) -> np.ndarray:
    beta = np.zeros(spec.p)
    if spec.model_id == 4:
        for m, r in enumerate((8, 6, 4, 2, 1)):
            beta[10 * m: 10 * (m + 1)] = r / 25.0
    else:
        beta[:50] = 1.0 / 25.0
    return beta


def simulate(spec: SimModelSpec) -> Simulation:
    """Draw one dataset together with its hidden components."""
    n, p = spec.n, spec.p
    u_ss, noise_ss, f_ss, ar_ss = np.random.SeedSequence(spec.seed).spawn(4)
    u = np.random.default_rng(u_ss).random((n, 3))

    comps, bounds = _latents(spec, u)
    latent_width = bounds[-1]
    noise = np.random.default_rng(noise_ss).standard_normal((latent_width, n)).T
    blocks = np.empty((n, latent_width))
    for k, H in enumerate(comps):
        blocks[:, bounds[k]: bounds[k + 1]] = H[:, None]
    X_latent = blocks + noise

    if spec.model_id == 4:
        L = ar1_covariance_factor(_AR_RHO, _AR_WIDTH)
        Z = np.random.default_rng(ar_ss).standard_normal((_AR_WIDTH, n)).T
        X = np.hstack([Z @ L.T, X_latent])
    else:
        X = X_latent

    F = noise_sd(spec.model_id) * np.random.default_rng(f_ss).standard_normal(n)
    beta = _beta(spec)
    Y = X @ beta + F

    data = Dataset(
        X=X,
        Y=Y.reshape(-1, 1),
        beta_true=beta.reshape(-1, 1),
        x_names=tuple(f"x{j}" for j in range(1, p + 1)),
        y_names=("y",),
    )
    return Simulation(data=data, latent=np.column_stack(comps), uniforms=u, boundaries=bounds)


def generate(spec: SimModelSpec) -> Dataset:
    return simulate(spec).data


def noise_sd(model_id: int) -> float:
    """Standard deviation of the response noise F."""
    if model_id not in _MIN_P:
        raise DataValidationError(f"unknown model {model_id}")
    return 1.5 if model_id in (1, 4) else 1.0
