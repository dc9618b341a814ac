"""
Tests for sphere.py: basis extension, the secular equation and the
sphere-constrained quadratic solver, checked against dense oracles.
"""
import numpy as np
import pytest


def _diag_problem(b, diag=(-1.0, -2.0)):
    """A = diag(diag) written as -G G' with G = diag(sqrt(-diag))."""
    from sparsepls.sphere import SphereQuadProblem
    return SphereQuadProblem(cross_factor=np.diag(np.sqrt(-np.asarray(diag))), H=None,
                             b_full=np.asarray(b, dtype=float))


def _random_problem(gen, p, q, m, curvature):
    from sparsepls.sphere import SphereQuadProblem
    G = gen.standard_normal((p, q))
    H = np.linalg.qr(gen.standard_normal((p, m)))[0] if m else np.zeros((p, 0))
    b = gen.standard_normal(p)
    b = b - H @ (H.T @ b)
    return SphereQuadProblem(cross_factor=G, H=H, b_full=b, curvature=curvature)


def _dense_A(problem):
    G = problem.spectrum.G
    return problem.curvature * G @ G.T


def _brute_force_circle(problem, points=1_000_000):
    theta = np.linspace(0.0, 2.0 * np.pi, points, endpoint=False)
    W = np.vstack([np.cos(theta), np.sin(theta)])
    A = _dense_A(problem)
    vals = np.einsum("ij,ij->j", W, A @ W) - 2.0 * problem.b_full @ W
    best = int(np.argmin(vals))
    # Local refinement around the best grid angle.
    from scipy.optimize import minimize_scalar
    step = 2.0 * np.pi / points

    def f(t):
        w = np.array([np.cos(t), np.sin(t)])
        return float(w @ A @ w - 2.0 * problem.b_full @ w)

    res = minimize_scalar(f, bounds=(theta[best] - step, theta[best] + step), method="bounded",
                          options={"xatol": 1e-12})
    return min(float(vals[best]), float(res.fun))


# ---------------------------------------------------------------------------
# Gram-Schmidt
# ---------------------------------------------------------------------------

class TestGramSchmidtExtend:
    def test_empty_basis_normalizes(self):
        from sparsepls.sphere import gram_schmidt_extend
        ext = gram_schmidt_extend(None, np.array([3.0, 4.0]))
        assert not ext.degenerate
        np.testing.assert_allclose(ext.basis[:, 0], [0.6, 0.8])

    def test_dependent_vector_flagged(self):
        from sparsepls.sphere import gram_schmidt_extend
        H = np.array([[1.0], [0.0], [0.0]])
        ext = gram_schmidt_extend(H, np.array([1.0, 0.0, 0.0]))
        assert ext.degenerate
        assert ext.basis.shape == (3, 1)

    def test_projection_then_normalize(self):
        from sparsepls.sphere import gram_schmidt_extend
        H = np.array([[1.0], [0.0], [0.0]])
        ext = gram_schmidt_extend(H, np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0))
        np.testing.assert_allclose(ext.basis[:, 1], [0.0, 1.0, 0.0], atol=1e-15)

    def test_zero_vector_degenerate(self):
        from sparsepls.sphere import gram_schmidt_extend
        assert gram_schmidt_extend(None, np.zeros(4)).degenerate

    def test_repeated_extension_stays_orthonormal(self, rng):
        from sparsepls.sphere import empty_basis, gram_schmidt_extend
        H = empty_basis(30)
        for _ in range(12):
            H = gram_schmidt_extend(H, rng.standard_normal(30)).basis
        np.testing.assert_allclose(H.T @ H, np.eye(12), atol=1e-12)


# ---------------------------------------------------------------------------
# Problem construction
# ---------------------------------------------------------------------------

class TestSphereQuadProblem:
    def test_bad_curvature(self):
        from sparsepls.errors import DataValidationError
        from sparsepls.sphere import SphereQuadProblem
        with pytest.raises(DataValidationError, match="curvature"):
            SphereQuadProblem(cross_factor=np.eye(2), H=None, b_full=np.ones(2), curvature=0.5)

    def test_non_orthonormal_H(self):
        from sparsepls.errors import DataValidationError
        from sparsepls.sphere import SphereQuadProblem
        with pytest.raises(DataValidationError, match="orthonormal"):
            SphereQuadProblem(cross_factor=np.eye(3), H=np.array([[2.0], [0.0], [0.0]]), b_full=np.zeros(3))

    def test_b_must_avoid_span_of_H(self):
        from sparsepls.errors import DataValidationError
        from sparsepls.sphere import SphereQuadProblem
        with pytest.raises(DataValidationError, match="orthogonal"):
            SphereQuadProblem(cross_factor=np.eye(3), H=np.array([[1.0], [0.0], [0.0]]),
                              b_full=np.array([1.0, 1.0, 0.0]))

    def test_mu_positive(self):
        from sparsepls.errors import DataValidationError
        from sparsepls.sphere import SphereQuadProblem
        with pytest.raises(DataValidationError, match="mu"):
            SphereQuadProblem(cross_factor=np.eye(2), H=None, b_full=np.ones(2), mu=0.0)

    def test_build_problem_scales_and_projects(self, make_xy):
        from sparsepls.sphere import build_problem, gram_schmidt_extend
        Xc, Yc = make_xy(15, 5, 2, seed=1)
        H = gram_schmidt_extend(None, np.arange(1.0, 6.0)).basis
        omega = np.ones(5)
        prob = build_problem(Xc, Yc, H, omega, mu=4.0)
        np.testing.assert_allclose(prob.cross_factor, Xc.T @ Yc / 15)
        np.testing.assert_allclose(H.T @ prob.b_full, 0.0, atol=1e-12)
        np.testing.assert_allclose(prob.b_full, 2.0 * (omega - H @ (H.T @ omega)))


# ---------------------------------------------------------------------------
# Spectrum and secular function
# ---------------------------------------------------------------------------

class TestMinEig:
    def test_zero_cross_factor(self):
        from sparsepls.sphere import SphereQuadProblem, min_eig_factored
        prob = SphereQuadProblem(cross_factor=np.zeros((4, 2)), H=None, b_full=np.ones(4))
        assert min_eig_factored(prob) == 0.0

    def test_rank_one(self):
        from sparsepls.sphere import SphereQuadProblem, min_eig_factored
        g = np.array([1.0, 2.0, 2.0])
        prob = SphereQuadProblem(cross_factor=g, H=None, b_full=np.zeros(3))
        assert min_eig_factored(prob) == pytest.approx(-9.0, rel=1e-12)

    def test_matches_dense_eigensolver(self, rng):
        from sparsepls.sphere import min_eig_factored
        for m in (0, 1, 2):
            prob = _random_problem(rng, 7, 2, m, -1.0)
            dense = _dense_A(prob)
            if m:
                N = np.linalg.svd(np.eye(7) - prob.H @ prob.H.T)[0][:, : 7 - m]
                expected = np.linalg.eigvalsh(N.T @ dense @ N).min()
            else:
                expected = np.linalg.eigvalsh(dense).min()
            assert min_eig_factored(prob) == pytest.approx(expected, abs=1e-10)


class TestGAndGPrime:
    def test_diagonal_example(self):
        from sparsepls.sphere import g_and_gprime
        g, gp = g_and_gprime(_diag_problem([2.0, 0.0]), -3.0)
        assert g == pytest.approx(1.0, rel=1e-12)
        assert gp == pytest.approx(2.0 * 4.0 / 8.0, rel=1e-12)

    def test_zero_b(self):
        from sparsepls.sphere import g_and_gprime
        assert g_and_gprime(_diag_problem([0.0, 0.0]), -5.0) == (0.0, 0.0)

    def test_alpha_at_or_above_dmin_rejected(self):
        from sparsepls.errors import ResolventError
        from sparsepls.sphere import g_and_gprime
        with pytest.raises(ResolventError):
            g_and_gprime(_diag_problem([1.0, 1.0]), -2.0)

    def test_woodbury_matches_dense_inverse(self, rng):
        from sparsepls.sphere import g_and_gprime
        for curvature in (-1.0, 1.0):
            for m in (0, 2):
                prob = _random_problem(rng, 8, 2, m, curvature)
                d = prob.spectrum.d_min
                for alpha in (d - 0.01, d - 0.7, d - 5.0):
                    if alpha == 0.0:
                        continue
                    R = np.linalg.inv(_dense_A(prob) - alpha * np.eye(8))
                    u = R @ prob.b_full
                    g_dense = u @ u
                    gp_dense = 2.0 * u @ (R @ u)
                    g, gp = g_and_gprime(prob, alpha)
                    assert g == pytest.approx(g_dense, rel=1e-8)
                    assert gp == pytest.approx(gp_dense, rel=1e-8)


class TestSecularSolve:
    def test_diagonal_example(self):
        from sparsepls.sphere import secular_solve
        assert secular_solve(_diag_problem([2.0, 0.0])) == pytest.approx(-3.0, abs=1e-8)

    def test_one_dimensional(self):
        from sparsepls.sphere import secular_solve
        assert secular_solve(_diag_problem([1.0], diag=(-2.0,))) == pytest.approx(-3.0, abs=1e-8)

    def test_random_root_satisfies_equation(self, rng):
        from sparsepls.sphere import g_and_gprime, secular_solve
        for _ in range(10):
            prob = _random_problem(rng, 6, 2, 1, -1.0)
            alpha = secular_solve(prob)
            assert alpha < prob.spectrum.d_min
            assert abs(g_and_gprime(prob, alpha)[0] - 1.0) <= 1e-10

    def test_root_within_rounding_of_dmin(self):
        from sparsepls.sphere import _secular_root, secular_solve
        # d_min = -7.5 and ||b|| ~ 1e-8: the root sits about 1e-8 left of d_min.
        prob = _diag_problem([1e-8, 1e-8], diag=(-7.5, -1.0))
        delta, iterations, resid = _secular_root(prob)
        assert resid <= 1e-10
        assert iterations < 200
        assert 0.0 < delta < 2e-8
        assert (1e-8 / delta) ** 2 + (1e-8 / (6.5 + delta)) ** 2 == pytest.approx(1.0, abs=1e-9)
        assert secular_solve(prob) < -7.5

    def test_solution_near_dmin_is_bottom_eigenvector(self):
        from sparsepls.sphere import solve_sphere_quadratic
        sol = solve_sphere_quadratic(_diag_problem([1e-8, 1e-8], diag=(-7.5, -1.0)))
        assert not sol.hard_case
        np.testing.assert_allclose(sol.w, [1.0, 0.0], atol=1e-8)
        assert sol.objective == pytest.approx(-7.5, abs=1e-7)

    def test_increasing_below_dmin(self, rng):
        from sparsepls.sphere import g_and_gprime
        for curvature in (-1.0, 1.0):
            prob = _random_problem(rng, 7, 2, 1, curvature)
            d = prob.spectrum.d_min
            alphas = d - np.geomspace(10.0, 1e-3, 40)
            values = [g_and_gprime(prob, a)[0] for a in alphas if a != 0.0]
            assert np.all(np.diff(values) > 0.0)

    def test_root_is_smallest_stationary_value(self):
        from numpy.polynomial import Polynomial
        from sparsepls.sphere import secular_solve

        gen = np.random.default_rng(31)
        for _ in range(20):
            prob = _random_problem(gen, 4, 2, 0, -1.0)
            lam, Q = np.linalg.eigh(_dense_A(prob))
            c2 = (Q.T @ prob.b_full) ** 2
            # Stationary alphas solve sum c_i^2 / (lam_i - a)^2 = 1; clear denominators.
            factors = [Polynomial([li, -1.0]) ** 2 for li in lam]
            poly = Polynomial([1.0])
            for f in factors:
                poly = poly * f
            for i in range(lam.size):
                rest = Polynomial([c2[i]])
                for j, f in enumerate(factors):
                    if j != i:
                        rest = rest * f
                poly = poly - rest
            roots = poly.roots()
            real = np.sort(roots[np.abs(roots.imag) <= 1e-6 * (1.0 + np.abs(roots.real))].real)
            alpha = secular_solve(prob)
            assert alpha == pytest.approx(real[0], abs=1e-6)

    def test_zero_b_has_no_root(self):
        from sparsepls.errors import ResolventError
        from sparsepls.sphere import secular_solve
        with pytest.raises(ResolventError):
            secular_solve(_diag_problem([0.0, 0.0]))

    def test_iteration_cap(self):
        from sparsepls.errors import ConvergenceError
        from sparsepls.sphere import secular_solve
        with pytest.raises(ConvergenceError):
            secular_solve(_diag_problem([0.3, 1.7]), eps2=0.0, max_iter=1)


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

class TestSolveSphereQuadratic:
    def test_easy_case(self):
        from sparsepls.sphere import solve_sphere_quadratic
        sol = solve_sphere_quadratic(_diag_problem([2.0, 0.0]))
        assert not sol.hard_case
        assert sol.alpha == pytest.approx(-3.0, abs=1e-8)
        np.testing.assert_allclose(sol.w, [1.0, 0.0], atol=1e-8)
        assert sol.objective == pytest.approx(-5.0, abs=1e-8)

    def test_hard_case(self):
        from sparsepls.sphere import solve_sphere_quadratic
        prob = _diag_problem([0.5, 0.0])
        sol = solve_sphere_quadratic(prob)
        assert sol.hard_case
        assert sol.alpha == pytest.approx(-2.0, abs=1e-12)
        np.testing.assert_allclose(sol.w, [0.5, np.sqrt(0.75)], atol=1e-6)
        assert sol.objective == pytest.approx(-2.25, abs=1e-6)
        assert sol.objective <= _brute_force_circle(prob) + 1e-9

    def test_easy_case_matches_circle_sweep(self):
        from sparsepls.sphere import solve_sphere_quadratic
        prob = _diag_problem([2.0, 0.0])
        assert solve_sphere_quadratic(prob).objective == pytest.approx(_brute_force_circle(prob), abs=1e-8)

    def test_zero_b_returns_bottom_eigenvector(self):
        from sparsepls.sphere import solve_sphere_quadratic
        sol = solve_sphere_quadratic(_diag_problem([0.0, 0.0]))
        assert sol.hard_case
        np.testing.assert_allclose(sol.w, [0.0, 1.0], atol=1e-12)
        assert sol.objective == pytest.approx(-2.0)

    def test_zero_curvature_is_projection(self):
        from sparsepls.sphere import SphereQuadProblem, solve_sphere_quadratic
        b = np.array([1.0, -2.0, 2.0])
        sol = solve_sphere_quadratic(SphereQuadProblem(cross_factor=np.zeros((3, 1)), H=None, b_full=b))
        np.testing.assert_allclose(sol.w, b / 3.0, atol=1e-10)

    def test_positive_curvature_hard_case_in_null_space(self):
        from sparsepls.sphere import SphereQuadProblem, solve_sphere_quadratic
        # A = e1 e1', minimum of w1^2 - w1 over the sphere is -1/4 at w1 = 1/2.
        prob = SphereQuadProblem(cross_factor=np.array([1.0, 0.0, 0.0]), H=None,
                                 b_full=np.array([0.5, 0.0, 0.0]), curvature=1.0)
        sol = solve_sphere_quadratic(prob)
        assert sol.hard_case
        assert sol.w[0] == pytest.approx(0.5, abs=1e-10)
        assert np.linalg.norm(sol.w) == pytest.approx(1.0, abs=1e-12)
        assert sol.objective == pytest.approx(-0.25, abs=1e-10)

    def test_complement_exhausted(self):
        from sparsepls.errors import ComplementExhaustedError
        from sparsepls.sphere import SphereQuadProblem, solve_sphere_quadratic
        prob = SphereQuadProblem(cross_factor=np.ones((2, 1)), H=np.eye(2), b_full=np.zeros(2))
        with pytest.raises(ComplementExhaustedError) as exc:
            solve_sphere_quadratic(prob)
        assert exc.value.achievable == 2

    def test_random_instances_against_multistart_oracle(self):
        from scipy.linalg import null_space
        from scipy.optimize import minimize
        from sparsepls.sphere import solve_sphere_quadratic

        gen = np.random.default_rng(123)
        for _ in range(100):
            p = int(gen.integers(2, 9))
            q = int(gen.integers(1, 3))
            m = int(gen.integers(0, min(2, p - 1) + 1))
            curvature = float(gen.choice([-1.0, 1.0]))
            prob = _random_problem(gen, p, q, m, curvature)
            sol = solve_sphere_quadratic(prob)

            assert np.linalg.norm(sol.w) == pytest.approx(1.0, abs=1e-10)
            assert np.linalg.norm(prob.H.T @ sol.w) <= 1e-8

            N = null_space(prob.H.T) if m else np.eye(p)
            A = _dense_A(prob)

            def f(u):
                w = N @ (u / np.linalg.norm(u))
                return float(w @ A @ w - 2.0 * prob.b_full @ w)

            best = min(minimize(f, gen.standard_normal(N.shape[1]), method="BFGS").fun for _ in range(20))
            assert sol.objective <= best + 1e-6
