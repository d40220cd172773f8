import numpy as np
import pytest
import scipy.sparse as sp

from corrop import fem, mesh, solvers
from corrop.fem import Field
from corrop.solvers import ConvergenceError, LinearSolveConfig, NewtonConfig


def test_identity_system():
    A = sp.identity(5, format="csr")
    b = np.arange(5.0)
    assert np.array_equal(solvers.solve_linear(A, b), b)


def test_two_by_two():
    A = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]))
    x = solvers.solve_linear(A, np.array([3.0, 3.0]))
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-12)


def test_random_spd_meets_tolerance():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((20, 20))
    A = sp.csr_matrix(B @ B.T + 20.0 * np.eye(20))
    b = rng.standard_normal(20)
    x = solvers.solve_linear(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_dense_method_matches_cg():
    rng = np.random.default_rng(1)
    B = rng.standard_normal((12, 12))
    A = sp.csr_matrix(B @ B.T + 12.0 * np.eye(12))
    b = rng.standard_normal(12)
    x_cg = solvers.solve_linear(A, b, LinearSolveConfig(method="cg"))
    x_dn = solvers.solve_linear(A, b, LinearSolveConfig(method="dense"))
    np.testing.assert_allclose(x_cg, x_dn, rtol=1e-8)


def test_zero_rhs_returns_zero():
    A = sp.identity(4, format="csr")
    assert np.array_equal(solvers.solve_linear(A, np.zeros(4)), np.zeros(4))


def test_iteration_cap_raises():
    rng = np.random.default_rng(2)
    B = rng.standard_normal((50, 50))
    A = sp.csr_matrix(B @ B.T + 1e-3 * np.eye(50))
    with pytest.raises(ConvergenceError):
        solvers.solve_linear(A, rng.standard_normal(50), LinearSolveConfig(max_iter=2))


def test_non_finite_rhs_rejected():
    A = sp.identity(3, format="csr")
    with pytest.raises(ValueError):
        solvers.solve_linear(A, np.array([1.0, np.inf, 0.0]))


def test_bad_config_rejected():
    with pytest.raises(ValueError):
        LinearSolveConfig(rel_tol=2.0)
    with pytest.raises(ValueError):
        LinearSolveConfig(max_iter=0)
    with pytest.raises(ValueError):
        NewtonConfig(residual_tol=0.0)


@pytest.fixture(scope="module")
def p1_setup():
    problem = fem.problem1()
    space = fem.make_space(mesh.build_unit_square_quad(12), problem)
    return problem, space


def test_newton_converges_from_zero(p1_setup):
    problem, space = p1_setup
    u, stats = solvers.newton_solve(problem, Field.zeros(space), Field.zeros(space))
    assert len(stats) - 1 <= 10          # updates actually taken
    assert stats[-1] <= 1e-10
    assert np.all(u.coeffs[space.dirichlet_dofs] == 0.0)


def test_newton_zero_updates_on_converged_start(p1_setup):
    problem, space = p1_setup
    m = Field.zeros(space)
    u, _ = solvers.newton_solve(problem, m, Field.zeros(space))
    again, stats = solvers.newton_solve(problem, m, u)
    assert len(stats) == 1
    assert np.array_equal(again.coeffs, u.coeffs)


def test_newton_deterministic(p1_setup):
    problem, space = p1_setup
    m = Field(space, 0.4 * np.random.default_rng(5).standard_normal(space.ndof))
    u1, s1 = solvers.newton_solve(problem, m, Field.zeros(space))
    u2, s2 = solvers.newton_solve(problem, m, Field.zeros(space))
    assert np.array_equal(u1.coeffs, u2.coeffs)
    assert s1 == s2


def test_newton_residuals_decrease(p1_setup):
    problem, space = p1_setup
    m = Field(space, 0.4 * np.random.default_rng(6).standard_normal(space.ndof))
    _, stats = solvers.newton_solve(problem, m, Field.zeros(space))
    assert all(b < a for a, b in zip(stats, stats[1:]))


def test_newton_quadratic_ratio(p1_setup):
    """The contraction constant r_next / r^2 stays stable over the final steps."""
    problem, space = p1_setup
    scaled = fem.ProblemDef(
        problem_id="p1",
        diffusivity=problem.diffusivity,
        source=lambda x: 60.0 * problem.source(x),
        dirichlet_tags=problem.dirichlet_tags,
    )
    _, stats = solvers.newton_solve(
        problem=scaled,
        m=Field.zeros(space),
        u0=Field.zeros(space),
        cfg=NewtonConfig(residual_tol=1e-12),
    )
    ratios = [b / a**2 for a, b in zip(stats, stats[1:]) if a < 1.0 and b > 1e-14]
    assert len(ratios) >= 2
    assert 0.1 <= ratios[-1] / ratios[-2] <= 10.0


def test_newton_linear_problem_single_step(p1_setup):
    """Without the cubic term one full step lands on the solution from any start."""
    _, space = p1_setup
    linear = fem.ProblemDef(
        problem_id="p1",
        diffusivity="exp",
        alpha=0.0,
        source=fem.problem1().source,
        dirichlet_tags=(mesh.BoundaryTag.BOTTOM,),
    )
    u0 = Field(space, np.random.default_rng(8).standard_normal(space.ndof))
    u, stats = solvers.newton_solve(linear, Field.zeros(space), u0, NewtonConfig(residual_tol=1e-9))
    assert len(stats) == 2
    assert np.all(u.coeffs[space.dirichlet_dofs] == 0.0)


def test_newton_iteration_cap(p1_setup):
    problem, space = p1_setup
    with pytest.raises(ConvergenceError):
        solvers.newton_solve(
            problem, Field.zeros(space), Field.zeros(space), NewtonConfig(max_iter=1, residual_tol=1e-14)
        )
