"""
pls.py - Classic PLS fits: NIPALS PLS2 and SIMPLS.

Both return a PlsModel whose weights act on the original (centered)
variables, so T = Xc W and beta = W Q' hold for either algorithm.  Each weight
column is sign-normalized so its largest-magnitude entry is positive.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .data import CenteringStats
from .errors import ConvergenceError, DataValidationError, DegenerateResponseError, RankDeficiencyError
from .logging_utils import log_event
from .settings import get_settings
from .sphere import empty_basis, gram_schmidt_extend

Algorithm = Literal["nipals", "simpls"]


@dataclass(frozen=True)
class NipalsInternals:
    R: np.ndarray   # deflated-space weights r_k
    C: np.ndarray   # response weights c_k
    B: np.ndarray   # inner regression vectors
    V: np.ndarray   # response scores v_k


@dataclass(frozen=True)
class PlsModel:
    W: np.ndarray
    T: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    beta: np.ndarray
    K: int
    centering: CenteringStats
    algorithm: Algorithm
    diagnostics: tuple[str, ...] = ()
    internals: NipalsInternals | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        for attr in ("W", "T", "P", "Q", "beta"):
            arr = np.array(getattr(self, attr), dtype=float, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    @property
    def p(self) -> int:
        return self.beta.shape[0]

    @property
    def q(self) -> int:
        return self.beta.shape[1]

    @property
    def n_components(self) -> int:
        return self.K

    @property
    def selected(self) -> np.ndarray:
        return np.ones(self.p, dtype=bool)

    def predict(self, Xnew: np.ndarray) -> np.ndarray:
        return predict(self, Xnew)


def _check_xy(Xc: np.ndarray, Yc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Xc = np.asarray(Xc, dtype=float)
    Yc = np.asarray(Yc, dtype=float)
    if Yc.ndim == 1:
        Yc = Yc.reshape(-1, 1)
    if Xc.ndim != 2 or Xc.shape[0] != Yc.shape[0]:
        raise DataValidationError(f"incompatible shapes X{Xc.shape} and Y{Yc.shape}")
    return Xc, Yc


def _orientation_signs(W: np.ndarray) -> np.ndarray:
    if W.shape[1] == 0:
        return np.ones(0)
    idx = np.argmax(np.abs(W), axis=0)
    signs = np.sign(W[idx, np.arange(W.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def _loadings(Xc: np.ndarray, Yc: np.ndarray, T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """P = Xc'T(T'T)^{-1}, Q = Yc'T(T'T)^{-1}."""
    if T.shape[1] == 0:
        return np.zeros((Xc.shape[1], 0)), np.zeros((Yc.shape[1], 0))
    TtT = T.T @ T
    P = np.linalg.solve(TtT, T.T @ Xc).T
    Q = np.linalg.solve(TtT, T.T @ Yc).T
    return P, Q


def _shortfall(requested: int, achieved: int, reason: str, exact: bool, *,
               degenerate_response: bool = False) -> tuple[str, ...]:
    if achieved >= requested:
        return ()
    if exact:
        cls = DegenerateResponseError if degenerate_response else RankDeficiencyError
        raise cls(reason, requested=requested, achievable=achieved)
    log_event("pls_early_stop", level="warning", requested=requested, achieved=achieved, reason=reason)
    return (f"extracted {achieved} of {requested} components: {reason}",)


def _validate_k(K: int) -> None:
    if K < 0:
        raise DataValidationError(f"component count must be non-negative, got {K}")


# ---------------------------------------------------------------------------
# NIPALS PLS2
# ---------------------------------------------------------------------------

def nipals_pls2(
    Xc: np.ndarray,
    Yc: np.ndarray,
    K: int,
    *,
    centering: CenteringStats | None = None,
    exact: bool = True,
    tol: float | None = None,
    max_iter: int | None = None,
) -> PlsModel:
    """
    PLS2 by alternating power iterations with explicit deflation.

    Inner loop: t = Xr, c = Y't/||.||, v = Yc, r = X'v/||.||, repeated until r
    moves by less than tol.  r starts from X'y for the response column with
    the largest norm.  Deflated-space weights are mapped back with
    W = R (P'R)^{-1}.
    """
    cfg = get_settings().pls
    tol = cfg.nipals_tol if tol is None else tol
    max_iter = cfg.nipals_max_iter if max_iter is None else max_iter
    Xc, Yc = _check_xy(Xc, Yc)
    _validate_k(K)
    n, p = Xc.shape
    q = Yc.shape[1]
    centering = centering or CenteringStats.identity(p, q)

    rank = int(np.linalg.matrix_rank(Xc))
    if K > rank:
        if exact:
            raise RankDeficiencyError("component count exceeds rank(Xc)", requested=K, achievable=rank)
    target = min(K, rank)

    X = Xc.copy()
    Y = Yc.copy()
    y_scale = np.linalg.norm(Yc)
    R, C, B, V, T, P = ([] for _ in range(6))
    reason = ""
    degenerate_response = False
    for k in range(target):
        col_norms = np.linalg.norm(Y, axis=0)
        if y_scale == 0 or col_norms.max() <= 1e-12 * y_scale:
            reason = "response is zero" if k == 0 else "deflated response is zero"
            degenerate_response = k == 0
            break
        r = X.T @ Y[:, int(np.argmax(col_norms))]
        rn = np.linalg.norm(r)
        if rn == 0.0:
            reason = "deflated cross-product is zero"
            degenerate_response = y_scale == 0
            break
        r /= rn
        for it in range(1, max_iter + 1):
            t = X @ r
            c = Y.T @ t
            cn = np.linalg.norm(c)
            if cn == 0.0:
                raise ConvergenceError("response weight vanished in NIPALS inner loop", component=k + 1)
            c /= cn
            v = Y @ c
            r_new = X.T @ v
            r_new /= np.linalg.norm(r_new)
            delta = np.linalg.norm(r_new - r)
            r = r_new
            if delta < tol:
                break
        else:
            raise ConvergenceError("NIPALS inner loop did not converge", component=k + 1)

        t = X @ r
        tt = float(t @ t)
        p_k = X.T @ t / tt
        b_k = Y.T @ t / tt
        X -= np.outer(t, p_k)
        Y -= np.outer(t, b_k)
        R.append(r); C.append(c); B.append(b_k); V.append(v); T.append(t); P.append(p_k)

    achieved = len(R)
    diagnostics = _shortfall(K, achieved, reason or "rank(Xc) reached", exact,
                             degenerate_response=degenerate_response)

    def stack(cols: list, rows: int) -> np.ndarray:
        return np.column_stack(cols) if cols else np.zeros((rows, 0))

    Rm, Cm, Bm, Vm = stack(R, p), stack(C, q), stack(B, q), stack(V, n)
    T_def, P_def = stack(T, n), stack(P, p)
    W = Rm @ np.linalg.inv(P_def.T @ Rm) if achieved else np.zeros((p, 0))

    signs = _orientation_signs(W)
    W, Rm, Cm, Vm = W * signs, Rm * signs, Cm * signs, Vm * signs
    Tm = T_def * signs
    Pm, Q = _loadings(Xc, Yc, Tm)
    beta = W @ Q.T if achieved else np.zeros((p, q))
    internals = NipalsInternals(R=Rm, C=Cm, B=Bm * signs, V=Vm)
    return PlsModel(W=W, T=Tm, P=Pm, Q=Q, beta=beta, K=achieved, centering=centering,
                    algorithm="nipals", diagnostics=diagnostics, internals=internals)


# ---------------------------------------------------------------------------
# SIMPLS
# ---------------------------------------------------------------------------

def simpls(
    Xc: np.ndarray,
    Yc: np.ndarray,
    K: int,
    *,
    centering: CenteringStats | None = None,
    exact: bool = True,
) -> PlsModel:
    """
    SIMPLS: w_k maximizes w'Xc'Yc Yc'Xc w over unit w with w'Xc'Xc w_j = 0.

    The dominant direction comes from the q x q eigenproblem of S'Pi S with
    S = Xc'Yc and Pi the projector off span{Xc'Xc w_j}; w = Pi S u / sqrt(lambda).
    """
    Xc, Yc = _check_xy(Xc, Yc)
    _validate_k(K)
    n, p = Xc.shape
    q = Yc.shape[1]
    centering = centering or CenteringStats.identity(p, q)
    rel_tol = get_settings().pls.degenerate_rel_tol

    S = Xc.T @ Yc
    s_norm = float(np.linalg.norm(S, 2)) if S.size else 0.0
    H = empty_basis(p)
    weights: list[np.ndarray] = []
    reason = ""
    for _ in range(K):
        if s_norm == 0.0:
            reason = "cross-product Xc'Yc is zero"
            break
        G = S - H @ (H.T @ S)
        G = G - H @ (H.T @ G)
        lam, vecs = np.linalg.eigh(G.T @ G)
        top = float(lam[-1])
        if top <= 0.0 or np.sqrt(top) <= rel_tol * s_norm:
            reason = "projected cross-product is numerically zero"
            break
        w = G @ vecs[:, -1] / np.sqrt(top)
        w /= np.linalg.norm(w)
        t = Xc @ w
        ext = gram_schmidt_extend(H, Xc.T @ t)
        if ext.degenerate:
            reason = "score direction collapsed"
            break
        H = ext.basis
        weights.append(w)

    achieved = len(weights)
    diagnostics = _shortfall(K, achieved, reason, exact, degenerate_response=(s_norm == 0.0 and
                                                                               not np.any(Yc)))
    W = np.column_stack(weights) if weights else np.zeros((p, 0))
    W = W * _orientation_signs(W)
    T = Xc @ W
    P, Q = _loadings(Xc, Yc, T)
    beta = W @ Q.T if achieved else np.zeros((p, q))
    return PlsModel(W=W, T=T, P=P, Q=Q, beta=beta, K=achieved, centering=centering,
                    algorithm="simpls", diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def predict(model: PlsModel, Xnew: np.ndarray) -> np.ndarray:
    """(Xnew - x_mean) / scale @ beta + y_mean."""
    Xnew = np.asarray(Xnew, dtype=float)
    if Xnew.ndim == 1:
        Xnew = Xnew.reshape(1, -1)
    if Xnew.shape[1] != model.p:
        raise DataValidationError(f"model expects {model.p} columns, got {Xnew.shape[1]}")
    return model.centering.transform_x(Xnew) @ model.beta + model.centering.y_mean


def transform(model: PlsModel, Xnew: np.ndarray) -> np.ndarray:
    """Latent scores of new rows in the model's frame."""
    Xnew = np.asarray(Xnew, dtype=float)
    if Xnew.ndim == 1:
        Xnew = Xnew.reshape(1, -1)
    if Xnew.shape[1] != model.p:
        raise DataValidationError(f"model expects {model.p} columns, got {Xnew.shape[1]}")
    return model.centering.transform_x(Xnew) @ model.W


def mean_model(p: int, q: int, centering: CenteringStats, algorithm: Algorithm = "simpls",
               note: str = "no components; predicts the training mean") -> PlsModel:
    """Zero-coefficient model used when nothing can be (or is) selected."""
    return PlsModel(W=np.zeros((p, 0)), T=np.zeros((0, 0)), P=np.zeros((p, 0)), Q=np.zeros((q, 0)),
                    beta=np.zeros((p, q)), K=0, centering=centering, algorithm=algorithm,
                    diagnostics=(note,))
