"""
l1spls.py - l1-penalized sparse PLS on a surrogate direction (baseline).

Each component alternates two blocks on M = Xk'Yk Yk'Xk:

  w-step: minimize (1 - 2 kappa) w'Mw - 2 (1 - kappa) (Mz)'w over unit w,
          a positive semidefinite sphere quadratic solved by sphere.py
  z-step: soft-threshold s = Mw / max|Mw| at lambda1, then normalize
          (the large-ridge limit of the elastic-net surrogate problem)

Components are extracted one at a time with score deflation of X and Y;
the final model is a SIMPLS refit on the union of surviving variables.
"""
from __future__ import annotations

import numpy as np
from pydantic import BaseModel, Field

from .admm import FitDiagnostics, SparsePlsModel, refit_selected
from .data import CenteringStats
from .errors import DataValidationError
from .logging_utils import log_event
from .pls import _check_xy, _orientation_signs, mean_model
from .sphere import SecularSolution, SphereQuadProblem, solve_sphere_quadratic


class L1SplsConfig(BaseModel):
    # kappa < 0.5 keeps the w-step curvature (1 - 2 kappa) M positive.
    kappa: float = Field(default=0.5 - 1e-6, gt=0.0, lt=0.5)
    lambda1: float = Field(default=0.0, ge=0.0)
    max_outer: int = Field(default=100, ge=1)
    tol: float = Field(default=1e-6, gt=0.0)


def w_step(S: np.ndarray, z: np.ndarray, kappa: float) -> SecularSolution:
    """Minimize (1-2k) w'SS'w - 2(1-k)(SS'z)'w on the unit sphere."""
    problem = SphereQuadProblem(
        cross_factor=np.sqrt(1.0 - 2.0 * kappa) * S,
        H=None,
        b_full=(1.0 - kappa) * (S @ (S.T @ z)),
        curvature=1.0,
    )
    return solve_sphere_quadratic(problem)


def w_step_objective(S: np.ndarray, z: np.ndarray, kappa: float, w: np.ndarray) -> float:
    Sw = S.T @ w
    return float((1.0 - 2.0 * kappa) * (Sw @ Sw) - 2.0 * (1.0 - kappa) * ((S.T @ z) @ Sw))


def z_step(S: np.ndarray, w: np.ndarray, lambda1: float) -> np.ndarray:
    """Scaled soft threshold of the surrogate direction; exact zeros below lambda1."""
    s = S @ (S.T @ w)
    top = np.abs(s).max()
    if top == 0.0:
        return np.zeros_like(s)
    scaled = s / top
    z = np.sign(scaled) * np.maximum(np.abs(scaled) - lambda1, 0.0)
    zn = np.linalg.norm(z)
    return z / zn if zn > 0 else np.zeros_like(z)


def _dominant_direction(S: np.ndarray) -> np.ndarray:
    lam, vecs = np.linalg.eigh(S.T @ S)
    w = S @ vecs[:, -1]
    w /= np.linalg.norm(w)
    return w * _orientation_signs(w.reshape(-1, 1))[0]


def fit_l1_spls(
    Xc: np.ndarray,
    Yc: np.ndarray,
    K: int,
    config: L1SplsConfig | None = None,
    *,
    centering: CenteringStats | None = None,
) -> SparsePlsModel:
    Xc, Yc = _check_xy(Xc, Yc)
    if K < 1:
        raise DataValidationError(f"K must be >= 1, got {K}")
    config = config or L1SplsConfig()
    n, p = Xc.shape
    q = Yc.shape[1]
    centering = centering or CenteringStats.identity(p, q)

    X = Xc.copy()
    Y = Yc.copy()
    directions: list[np.ndarray] = []
    union = np.zeros(p, dtype=bool)
    total_iter = 0
    last_change = 0.0
    converged_all = True
    notes: list[str] = []

    for k in range(K):
        S = X.T @ Y
        if not np.any(S):
            notes.append(f"component {k + 1}: deflated cross-product is zero")
            break
        w = _dominant_direction(S)
        z = w.copy()
        converged = False
        for it in range(1, config.max_outer + 1):
            total_iter += 1
            w = w_step(S, z, config.kappa).w
            z_new = z_step(S, w, config.lambda1)
            last_change = float(np.abs(z_new - z).max())
            z = z_new
            if not z.any():
                converged = True
                break
            if last_change < config.tol:
                converged = True
                break
        if not converged:
            converged_all = False
            log_event("l1_spls_max_outer", level="warning", component=k + 1, change=last_change)
        if not z.any():
            notes.append(f"component {k + 1}: every variable shrunk to zero")
            break

        directions.append(z)
        union |= z != 0.0
        t = X @ z
        tt = float(t @ t)
        if tt == 0.0:
            notes.append(f"component {k + 1}: sparse direction has a null score")
            break
        X = X - np.outer(t, X.T @ t / tt)
        Y = Y - np.outer(t, Y.T @ t / tt)

    search = np.column_stack(directions) if directions else np.zeros((p, 0))
    diag = FitDiagnostics(iterations=total_iter, final_residual=last_change, converged=converged_all,
                          notes=tuple(notes))
    if not union.any():
        return SparsePlsModel(model=mean_model(p, q, centering), selected=union, lam=config.lambda1, K=0,
                              diagnostics=diag, method="l1_spls", search_weights=search)
    model = refit_selected(Xc, Yc, union, K, centering=centering)
    return SparsePlsModel(model=model, selected=union, lam=config.lambda1, K=model.K, diagnostics=diag,
                          method="l1_spls", search_weights=search)
