"""
admm.py - Jointly sparse global SIMPLS fitted by an augmented Lagrangian.

The K weight vectors are fitted jointly under a row-wise l1-of-l2 penalty.
Splitting W = M gives three alternating steps per iteration:

  W  <- greedy column-by-column sphere quadratics (sphere.py), each column
        conjugate to the earlier ones in the Xc'Xc inner product
  M  <- row soft threshold of W - D at lambda / mu
  D  <- D - W + M

mu grows geometrically; by default the scaled dual D is rescaled by
mu_old / mu_new so mu * D (the unscaled multiplier) is preserved.  Variables
whose M-row ends exactly zero are dropped and SIMPLS is refitted on the rest.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CenteringStats
from .errors import ComplementExhaustedError, ConvergenceError, DataValidationError
from .logging_utils import log_event
from .pls import PlsModel, _check_xy, mean_model, simpls
from .settings import AdmmOptions, get_settings
from .sphere import build_problem, empty_basis, gram_schmidt_extend, solve_sphere_quadratic


@dataclass(frozen=True)
class AdmmState:
    W: np.ndarray
    M: np.ndarray
    D: np.ndarray
    mu: float
    iteration: int
    primal_residual: float


@dataclass(frozen=True)
class FitDiagnostics:
    iterations: int
    final_residual: float
    converged: bool
    mu_final: float | None = None
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class SparsePlsModel:
    model: PlsModel
    selected: np.ndarray
    lam: float
    K: int
    diagnostics: FitDiagnostics
    method: str = "global_simpls"
    # Weights from the sparse search itself (W of the last state, or the
    # per-component l1 directions); the refitted model carries its own W.
    search_weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        sel = np.array(self.selected, dtype=bool, copy=True)
        sel.setflags(write=False)
        object.__setattr__(self, "selected", sel)

    @property
    def n_components(self) -> int:
        return self.model.K

    @property
    def n_selected(self) -> int:
        return int(self.selected.sum())

    @property
    def beta(self) -> np.ndarray:
        return self.model.beta

    def predict(self, Xnew: np.ndarray) -> np.ndarray:
        return self.model.predict(Xnew)


# ---------------------------------------------------------------------------
# Proximal step
# ---------------------------------------------------------------------------

def row_soft_threshold(delta_row: np.ndarray, t: float) -> np.ndarray:
    """[||d|| - t]_+ d / ||d||; rows at or below the threshold become exact zeros."""
    if t < 0:
        raise DataValidationError(f"threshold must be non-negative, got {t}")
    d = np.asarray(delta_row, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm <= t or norm == 0.0:
        return np.zeros_like(d)
    if t == 0.0:
        return d.copy()
    return (norm - t) / norm * d


def update_M(W: np.ndarray, D: np.ndarray, lam: float, mu: float) -> np.ndarray:
    """Row-wise soft threshold of W - D at lam / mu."""
    if W.shape != D.shape:
        raise DataValidationError(f"W{W.shape} and D{D.shape} differ in shape")
    if lam < 0 or mu <= 0:
        raise DataValidationError("need lam >= 0 and mu > 0")
    delta = W - D
    t = lam / mu
    if t == 0.0:
        return delta
    norms = np.linalg.norm(delta, axis=1)
    keep = norms > t
    M = np.zeros_like(delta)
    M[keep] = delta[keep] * ((norms[keep] - t) / norms[keep])[:, None]
    return M


# ---------------------------------------------------------------------------
# Weight step
# ---------------------------------------------------------------------------

def update_W(Xc: np.ndarray, Yc: np.ndarray, M: np.ndarray, D: np.ndarray, mu: float, K: int) -> np.ndarray:
    """Greedy column-wise minimization; column k sees the conjugacy basis of columns < k."""
    Xc, Yc = _check_xy(Xc, Yc)
    p = Xc.shape[1]
    if mu <= 0:
        raise DataValidationError(f"mu must be positive, got {mu}")
    H = empty_basis(p)
    W = np.zeros((p, K))
    for k in range(K):
        omega = M[:, k] + D[:, k]
        try:
            sol = solve_sphere_quadratic(build_problem(Xc, Yc, H, omega, mu))
        except ComplementExhaustedError as exc:
            raise ComplementExhaustedError("conjugacy constraints exhaust the space", achievable=k) from exc
        W[:, k] = sol.w
        if k + 1 < K:
            ext = gram_schmidt_extend(H, Xc.T @ (Xc @ sol.w))
            if ext.degenerate:
                # Xc w_k = 0: every later column is unconstrained by it, but the
                # remaining directions cannot produce new scores.
                raise ComplementExhaustedError("weight column has a null score", achievable=k + 1)
            H = ext.basis
    return W


# ---------------------------------------------------------------------------
# Selection and refit
# ---------------------------------------------------------------------------

def refit_selected(
    Xc: np.ndarray,
    Yc: np.ndarray,
    selected: np.ndarray,
    K: int,
    *,
    centering: CenteringStats | None = None,
) -> PlsModel:
    """SIMPLS on the selected columns with min(K, achievable) components, embedded in p x q."""
    Xc, Yc = _check_xy(Xc, Yc)
    n, p = Xc.shape
    q = Yc.shape[1]
    selected = np.asarray(selected, dtype=bool)
    centering = centering or CenteringStats.identity(p, q)
    if selected.shape != (p,):
        raise DataValidationError(f"selection mask has shape {selected.shape}, expected {(p,)}")
    if not selected.any():
        raise DataValidationError("refit needs at least one selected variable")
    if selected.all():
        return simpls(Xc, Yc, K, centering=centering, exact=False)

    sub = simpls(Xc[:, selected], Yc, K, centering=centering.restrict(selected), exact=False)

    def embed(a: np.ndarray) -> np.ndarray:
        out = np.zeros((p, a.shape[1]))
        out[selected] = a
        return out

    return PlsModel(W=embed(sub.W), T=sub.T, P=embed(sub.P), Q=sub.Q, beta=embed(sub.beta), K=sub.K,
                    centering=centering, algorithm="simpls", diagnostics=sub.diagnostics)


def _initial_weights(Xc: np.ndarray, Yc: np.ndarray, K: int) -> tuple[np.ndarray, tuple[str, ...]]:
    init = simpls(Xc, Yc, K, exact=False)
    M0 = np.zeros((Xc.shape[1], K))
    M0[:, : init.K] = init.W
    notes: tuple[str, ...] = ()
    if init.K < K:
        notes = (f"SIMPLS initialization produced {init.K} of {K} columns; rest zero",)
    return M0, notes


def lambda_max(Xc: np.ndarray, Yc: np.ndarray, K: int, opts: AdmmOptions | None = None) -> float:
    """Smallest lambda whose first M-update zeroes every row (D0 = 0, M0 = SIMPLS)."""
    Xc, Yc = _check_xy(Xc, Yc)
    opts = opts or get_settings().admm
    M0, _ = _initial_weights(Xc, Yc, K)
    W1 = update_W(Xc, Yc, M0, np.zeros_like(M0), opts.mu0, K)
    # Nudged up so rounding in the threshold test cannot leave a row alive.
    return float(opts.mu0 * np.linalg.norm(W1, axis=1).max() * (1.0 + 1e-12))


# ---------------------------------------------------------------------------
# Fit
# ---------------------------------------------------------------------------

def fit_global_simpls(
    Xc: np.ndarray,
    Yc: np.ndarray,
    K: int,
    lam: float,
    opts: AdmmOptions | None = None,
    *,
    centering: CenteringStats | None = None,
) -> SparsePlsModel:
    Xc, Yc = _check_xy(Xc, Yc)
    if K < 1:
        raise DataValidationError(f"K must be >= 1, got {K}")
    if lam < 0:
        raise DataValidationError(f"lambda must be >= 0, got {lam}")
    opts = opts or get_settings().admm
    n, p = Xc.shape
    q = Yc.shape[1]
    centering = centering or CenteringStats.identity(p, q)

    M, notes = _initial_weights(Xc, Yc, K)
    D = np.zeros_like(M)
    mu = opts.mu0
    best: AdmmState | None = None
    state: AdmmState | None = None
    converged = False

    for it in range(1, opts.max_iter + 1):
        W = update_W(Xc, Yc, M, D, mu, K)
        M = update_M(W, D, lam, mu)
        if it == 1 and not M.any():
            log_event("admm_total_shrinkage", lam=lam, mu=mu)
            diag = FitDiagnostics(iterations=1, final_residual=float(np.linalg.norm(W)), converged=True,
                                  mu_final=mu, notes=notes + ("total_shrinkage",))
            return SparsePlsModel(model=mean_model(p, q, centering), selected=np.zeros(p, dtype=bool),
                                  lam=lam, K=0, diagnostics=diag, search_weights=W)
        D = D - W + M
        residual = float(np.linalg.norm(W - M))
        state = AdmmState(W=W, M=M, D=D, mu=mu, iteration=it, primal_residual=residual)
        if best is None or residual < best.primal_residual:
            best = state
        if residual < opts.eps:
            converged = True
            break
        mu_new = mu * opts.mu_growth
        if opts.dual_rescale and mu_new != mu:
            D = D * (mu / mu_new)
        mu = mu_new

    final = state if converged else best
    if final is None or state is None:
        raise ConvergenceError("ADMM ran no iterations")
    if not converged:
        log_event("admm_max_iter", level="warning", lam=lam, K=K, residual=final.primal_residual,
                  iterations=opts.max_iter)
    else:
        log_event("admm_converged", level="debug", lam=lam, K=K, iterations=final.iteration)

    selected = np.linalg.norm(final.M, axis=1) > 0.0
    diag = FitDiagnostics(iterations=state.iteration, final_residual=final.primal_residual,
                          converged=converged, mu_final=final.mu, notes=notes)
    if not selected.any():
        return SparsePlsModel(model=mean_model(p, q, centering), selected=selected, lam=lam, K=0,
                              diagnostics=diag, search_weights=final.W)
    model = refit_selected(Xc, Yc, selected, K, centering=centering)
    return SparsePlsModel(model=model, selected=selected, lam=lam, K=model.K, diagnostics=diag,
                          search_weights=final.W)
