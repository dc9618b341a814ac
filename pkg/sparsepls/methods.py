"""
methods.py - One entry point per fitting method, used by CV, experiments and the CLI.
"""
from __future__ import annotations

from typing import Literal, Protocol

import numpy as np
from pydantic import BaseModel, Field

from .admm import SparsePlsModel, fit_global_simpls
from .data import CenteringStats
from .l1spls import L1SplsConfig, fit_l1_spls
from .pls import PlsModel, nipals_pls2, simpls
from .settings import AdmmOptions, get_settings

MethodName = Literal["pls", "simpls", "l1_spls", "global_simpls"]
METHOD_NAMES: tuple[str, ...] = ("pls", "simpls", "l1_spls", "global_simpls")
PENALIZED: frozenset[str] = frozenset({"l1_spls", "global_simpls"})


class FittedModel(Protocol):
    @property
    def n_components(self) -> int: ...

    @property
    def selected(self) -> np.ndarray: ...

    @property
    def beta(self) -> np.ndarray: ...

    def predict(self, Xnew: np.ndarray) -> np.ndarray: ...


class MethodConfig(BaseModel):
    name: MethodName
    admm: AdmmOptions = Field(default_factory=lambda: get_settings().admm.model_copy())
    kappa: float = Field(default_factory=lambda: get_settings().l1.kappa, gt=0.0, lt=0.5)
    l1_max_outer: int = Field(default_factory=lambda: get_settings().l1.max_outer, ge=1)
    l1_tol: float = Field(default_factory=lambda: get_settings().l1.tol, gt=0.0)

    @property
    def uses_lambda(self) -> bool:
        return self.name in PENALIZED


def fit_method(
    method: MethodConfig,
    Xc: np.ndarray,
    Yc: np.ndarray,
    K: int,
    lam: float = 0.0,
    *,
    centering: CenteringStats | None = None,
) -> PlsModel | SparsePlsModel:
    """Fit one grid cell.  Unpenalized methods ignore lam and truncate K when rank runs out."""
    if method.name == "pls":
        return nipals_pls2(Xc, Yc, K, centering=centering, exact=False)
    elif method.name == "simpls":
        return simpls(Xc, Yc, K, centering=centering, exact=False)
    elif method.name == "global_simpls":
        return fit_global_simpls(Xc, Yc, K, lam, method.admm, centering=centering)
    elif method.name == "l1_spls":
        cfg = L1SplsConfig(kappa=method.kappa, lambda1=lam, max_outer=method.l1_max_outer, tol=method.l1_tol)
        return fit_l1_spls(Xc, Yc, K, cfg, centering=centering)
    raise ValueError(f"unknown method {method.name!r}")
