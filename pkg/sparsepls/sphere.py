"""
sphere.py - Minimize w'Aw - 2b'w over unit vectors orthogonal to span(H).

A is never formed.  It is carried as curvature * G G' with G the p x q cross
factor projected onto the orthogonal complement of H, so every spectral
quantity comes from the q x q matrix G'G and every resolvent application
(A - alpha I)^{-1} v is a Woodbury update needing one q x q solve.

curvature = -1 is the weight subproblem of the jointly sparse fit
(A = -(1/n^2) Pi X'YY'X Pi); curvature = +1 is the positive semidefinite
w-step of the l1 baseline.

The multiplier alpha is the leftmost root of the secular equation
g(alpha) = b'(A - alpha I)^{-2} b = 1, found by a Newton iteration on
g^{-1/2} - 1 kept inside a bisection bracket.  The iteration runs on the
offset delta = d_min - alpha in the eigen-coordinates of A, so a root
sitting within rounding distance of d_min is still resolved;
g_and_gprime evaluates the same function through the Woodbury resolvent.
When b has no contact with the bottom eigenspace and g stays below one the
minimizer sits at alpha = d_min (the hard case) and is assembled from the
pseudo-inverse solution plus a bottom eigenvector.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import ComplementExhaustedError, ConvergenceError, DataValidationError, ResolventError
from .logging_utils import log_event
from .settings import get_settings

_MACHINE_EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# Basis bookkeeping
# ---------------------------------------------------------------------------

class BasisExtension(NamedTuple):
    basis: np.ndarray
    degenerate: bool


def empty_basis(p: int) -> np.ndarray:
    return np.zeros((p, 0))


def gram_schmidt_extend(H: np.ndarray | None, v: np.ndarray, tol: float | None = None) -> BasisExtension:
    """
    Append v, orthonormalized against the columns of H.

    Two projection passes keep H'H = I to working precision.  A residual
    below tol * ||v|| leaves H unchanged and reports degeneracy.
    """
    v = np.asarray(v, dtype=float).ravel()
    H = empty_basis(v.size) if H is None else np.asarray(H, dtype=float)
    tol = get_settings().solver.gram_schmidt_tol if tol is None else tol

    vn = np.linalg.norm(v)
    if vn == 0.0:
        return BasisExtension(H, True)
    r = v - H @ (H.T @ v)
    r = r - H @ (H.T @ r)
    rn = np.linalg.norm(r)
    if rn <= tol * vn:
        return BasisExtension(H, True)
    return BasisExtension(np.column_stack([H, r / rn]), False)


def _orient(v: np.ndarray) -> np.ndarray:
    # First coordinate that is not numerical noise becomes positive.
    big = np.abs(v).max() if v.size else 0.0
    if big == 0.0:
        return v
    j = int(np.flatnonzero(np.abs(v) > 1e-12 * big)[0])
    return -v if v[j] < 0 else v


# ---------------------------------------------------------------------------
# Problem and spectral cache
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Spectrum:
    G: np.ndarray          # projected cross factor, p x q
    U: np.ndarray          # eigenvectors of A with nonzero eigenvalue, p x r
    eig: np.ndarray        # matching eigenvalues, ascending
    null_dim: int          # dimension of null(A) inside the complement
    d_min: float


class _SecularTerms(NamedTuple):
    coef: np.ndarray       # U'b
    gap: np.ndarray        # eig - d_min, non-negative
    b_null: np.ndarray     # part of b in null(A) inside the complement
    null2: float


@dataclass(frozen=True)
class SphereQuadProblem:
    cross_factor: np.ndarray
    H: np.ndarray
    b_full: np.ndarray
    mu: float = 1.0
    curvature: float = -1.0

    def __post_init__(self) -> None:
        G0 = np.array(self.cross_factor, dtype=float, copy=True)
        if G0.ndim == 1:
            G0 = G0.reshape(-1, 1)
        p = G0.shape[0]
        H = empty_basis(p) if self.H is None else np.array(self.H, dtype=float, copy=True)
        if H.ndim == 1:
            H = H.reshape(-1, 1)
        b = np.array(self.b_full, dtype=float, copy=True).ravel()
        if H.shape[0] != p or b.size != p:
            raise DataValidationError(
                f"cross_factor has {p} rows but H has {H.shape[0]} and b has {b.size}"
            )
        if self.curvature not in (-1.0, 1.0):
            raise DataValidationError(f"curvature must be -1 or +1, got {self.curvature}")
        if self.mu <= 0:
            raise DataValidationError(f"mu must be positive, got {self.mu}")
        if H.shape[1]:
            if not np.allclose(H.T @ H, np.eye(H.shape[1]), rtol=0.0, atol=1e-10):
                raise DataValidationError("H must have orthonormal columns")
            bn = np.linalg.norm(b)
            if np.linalg.norm(H.T @ b) > 1e-8 * max(bn, np.finfo(float).tiny):
                raise DataValidationError("b_full must be orthogonal to span(H)")
        for attr, arr in (("cross_factor", G0), ("H", H), ("b_full", b)):
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    @property
    def p(self) -> int:
        return self.cross_factor.shape[0]

    @property
    def complement_dim(self) -> int:
        return self.p - self.H.shape[1]

    def project(self, v: np.ndarray) -> np.ndarray:
        """Apply Pi = I - HH' without forming it."""
        if self.H.shape[1] == 0:
            return v
        return v - self.H @ (self.H.T @ v)

    @cached_property
    def spectrum(self) -> _Spectrum:
        tol = get_settings().solver.rank_rel_tol
        G = self.project(self.project(self.cross_factor))
        lam, V = np.linalg.eigh(G.T @ G)
        lam_max = lam[-1] if lam.size else 0.0
        keep = lam > tol * lam_max if lam_max > 0 else np.zeros(lam.shape, dtype=bool)
        sig2 = lam[keep]
        U = (G @ V[:, keep]) / np.sqrt(sig2) if sig2.size else np.zeros((self.p, 0))
        eig = self.curvature * sig2
        order = np.argsort(eig, kind="stable")
        eig, U = eig[order], U[:, order]
        null_dim = self.complement_dim - eig.size
        candidates = list(eig[:1])
        if null_dim > 0:
            candidates.append(0.0)
        d_min = float(min(candidates)) if candidates else 0.0
        return _Spectrum(G=G, U=U, eig=eig, null_dim=null_dim, d_min=d_min)

    @cached_property
    def secular_terms(self) -> _SecularTerms:
        sp = self.spectrum
        b = self.project(self.b_full)
        coef = sp.U.T @ b
        b_null = b - sp.U @ coef if sp.null_dim > 0 else np.zeros_like(b)
        return _SecularTerms(coef=coef, gap=np.maximum(sp.eig - sp.d_min, 0.0), b_null=b_null,
                             null2=float(b_null @ b_null))

    def apply_A(self, v: np.ndarray) -> np.ndarray:
        G = self.spectrum.G
        return self.curvature * (G @ (G.T @ v))

    def objective(self, w: np.ndarray) -> float:
        return float(w @ self.apply_A(w) - 2.0 * self.b_full @ w)


def build_problem(
    Xc: np.ndarray,
    Yc: np.ndarray,
    H: np.ndarray | None,
    omega: np.ndarray,
    mu: float,
) -> SphereQuadProblem:
    """Weight subproblem: A = -(1/n^2) Pi Xc'Yc Yc'Xc Pi, b = (mu/2) Pi omega."""
    n, p = Xc.shape
    H = empty_basis(p) if H is None else H
    omega = np.asarray(omega, dtype=float)
    b = 0.5 * mu * (omega - H @ (H.T @ omega))
    return SphereQuadProblem(cross_factor=(Xc.T @ Yc) / n, H=H, b_full=b, mu=mu, curvature=-1.0)


@dataclass(frozen=True)
class SecularSolution:
    alpha: float
    w: np.ndarray
    objective: float
    hard_case: bool
    iterations: int


# ---------------------------------------------------------------------------
# Resolvent and secular function
# ---------------------------------------------------------------------------

def min_eig_factored(problem: SphereQuadProblem) -> float:
    """Smallest eigenvalue of A on the complement, from the q x q matrix G'Pi G."""
    return problem.spectrum.d_min


def _resolve(problem: SphereQuadProblem, alpha: float, v: np.ndarray) -> np.ndarray:
    sp = problem.spectrum
    c = problem.curvature
    if alpha == 0.0:
        # Only reachable for curvature +1 with a trivial null space.
        return sp.U @ ((sp.U.T @ v) / sp.eig)
    G = sp.G
    core = np.eye(G.shape[1]) - (c / alpha) * (G.T @ G)
    z = np.linalg.solve(core, G.T @ v)
    return -(v + (c / alpha) * (G @ z)) / alpha


def _g_pair(problem: SphereQuadProblem, alpha: float) -> tuple[float, float]:
    u = _resolve(problem, alpha, problem.b_full)
    g = float(u @ u)
    gp = 2.0 * float(u @ _resolve(problem, alpha, u))
    return g, gp


def g_and_gprime(problem: SphereQuadProblem, alpha: float) -> tuple[float, float]:
    """g(alpha) = b'(A - alpha I)^{-2} b and its derivative 2 b'(A - alpha I)^{-3} b."""
    d = problem.spectrum.d_min
    if not alpha < d:
        raise ResolventError(f"alpha={alpha!r} must lie strictly below d_min={d!r}")
    if not np.any(problem.b_full):
        return 0.0, 0.0
    return _g_pair(problem, alpha)


def _g_offset(problem: SphereQuadProblem, delta: float) -> tuple[float, float]:
    """g and g' at alpha = d_min - delta, from the eigen-coordinates of b."""
    t = problem.secular_terms
    shifted = t.gap + delta
    r = t.coef / shifted
    g = float(r @ r)
    gp = 2.0 * float(np.sum(r * r / shifted))
    if t.null2:
        s = delta - problem.spectrum.d_min
        g += t.null2 / (s * s)
        gp += 2.0 * t.null2 / (s * s * s)
    return g, gp


def _direction(problem: SphereQuadProblem, delta: float) -> np.ndarray:
    """(A - alpha I)^{-1} b at alpha = d_min - delta."""
    t = problem.secular_terms
    w = problem.spectrum.U @ (t.coef / (t.gap + delta))
    if t.null2:
        w = w + t.b_null / (delta - problem.spectrum.d_min)
    return w


def _secular_root(
    problem: SphereQuadProblem,
    *,
    eps2: float | None = None,
    max_iter: int | None = None,
) -> tuple[float, int, float]:
    """Offset delta = d_min - alpha of the root, iteration count and final residual."""
    cfg = get_settings().solver
    eps2 = cfg.secular_eps2 if eps2 is None else eps2
    max_iter = cfg.secular_max_iter if max_iter is None else max_iter

    d = problem.spectrum.d_min
    bn = float(np.linalg.norm(problem.b_full))
    if bn == 0.0:
        raise ResolventError("secular equation has no root when b = 0")

    # g is decreasing in delta, g(||b||) <= 1, and g grows without bound as
    # delta -> 0 outside the hard case.
    lo, hi = 0.0, bn
    delta = min(cfg.secular_eps1_rel * max(1.0, abs(d)), hi)
    prev_resid = np.inf
    resid = np.inf
    for it in range(1, max_iter + 1):
        g, gp = _g_offset(problem, delta)
        resid = abs(g - 1.0)
        if resid <= eps2:
            return delta, it, resid
        if g < 1.0:
            hi = min(hi, delta)
        else:
            lo = max(lo, delta)
        if hi - lo <= 4.0 * _MACHINE_EPS * hi:
            log_event("secular_bracket_collapsed", level="debug", delta=delta, residual=resid, iterations=it)
            return delta, it, resid

        cand = delta - 2.0 * (g ** -0.5 - 1.0) / (g ** -1.5 * gp) if gp > 0 else np.nan
        if not (lo < cand <= hi) or cand == delta or resid >= prev_resid:
            cand = 0.5 * (lo + hi)
            log_event("secular_bisection", level="debug", iteration=it, residual=resid)
        prev_resid = resid
        delta = cand
    raise ConvergenceError("secular iteration did not converge", residual=resid)


def secular_solve(
    problem: SphereQuadProblem,
    *,
    eps2: float | None = None,
    max_iter: int | None = None,
) -> float:
    """Leftmost root of g(alpha) = 1 below d_min."""
    delta, _, _ = _secular_root(problem, eps2=eps2, max_iter=max_iter)
    return problem.spectrum.d_min - delta


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

def _bottom_vector(problem: SphereQuadProblem, bottom: np.ndarray, null_in_bottom: bool) -> np.ndarray:
    sp = problem.spectrum
    if bottom.size:
        return _orient(sp.U[:, bottom[0]].copy())
    if not null_in_bottom:
        raise ResolventError("no bottom eigenvector available")
    # Null space of A inside the complement is range(I - HH' - UU'); pick the
    # coordinate axis with the largest residual and project it.
    H, U = problem.H, sp.U
    weight = 1.0 - (H * H).sum(axis=1) - (U * U).sum(axis=1)
    j = int(np.argmax(weight))
    v = -(H @ H[j]) - (U @ U[j])
    v[j] += 1.0
    for _ in range(2):
        v = v - H @ (H.T @ v) - U @ (U.T @ v)
        v /= np.linalg.norm(v)
    return _orient(v)


def solve_sphere_quadratic(problem: SphereQuadProblem) -> SecularSolution:
    """Global minimizer of w'Aw - 2b'w on the unit sphere of the complement of H."""
    if problem.complement_dim < 1:
        raise ComplementExhaustedError(
            "no direction left orthogonal to the constraints", achievable=problem.H.shape[1]
        )
    cfg = get_settings().solver
    sp = problem.spectrum
    d = sp.d_min
    b = problem.b_full
    bn = float(np.linalg.norm(b))

    btol = 1e-10 * max(1.0, abs(d))
    bottom = np.flatnonzero(np.abs(sp.eig - d) <= btol)
    null_in_bottom = sp.null_dim > 0 and d == 0.0

    if bn == 0.0:
        w = _bottom_vector(problem, bottom, null_in_bottom)
        return SecularSolution(alpha=d, w=w, objective=problem.objective(w), hard_case=True, iterations=0)

    coef, b_null = problem.secular_terms.coef, problem.secular_terms.b_null
    contact2 = float(np.sum(coef[bottom] ** 2))
    if null_in_bottom:
        contact2 += float(b_null @ b_null)

    if np.sqrt(contact2) <= cfg.hard_case_rel_tol * bn:
        rest = np.setdiff1d(np.arange(sp.eig.size), bottom)
        x = sp.U[:, rest] @ (coef[rest] / (sp.eig[rest] - d))
        if sp.null_dim > 0 and not null_in_bottom:
            x = x + b_null / (-d)
        xn = float(np.linalg.norm(x))
        eps1 = cfg.secular_eps1_rel * max(1.0, abs(d))
        g_left, _ = _g_offset(problem, eps1)
        if g_left < 1.0 and xn < 1.0:
            v = _bottom_vector(problem, bottom, null_in_bottom)
            tau = np.sqrt(max(0.0, 1.0 - xn * xn))
            w = problem.project(x + tau * v)
            w = w / np.linalg.norm(w)
            log_event("sphere_hard_case", level="debug", d_min=d, pinv_norm=xn)
            return SecularSolution(alpha=d, w=w, objective=problem.objective(w), hard_case=True, iterations=0)

    delta, iterations, _ = _secular_root(problem)
    alpha = d - delta
    w = problem.project(_direction(problem, delta))
    w = w / np.linalg.norm(w)
    return SecularSolution(alpha=alpha, w=w, objective=problem.objective(w), hard_case=False,
                           iterations=iterations)
