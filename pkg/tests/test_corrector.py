import numpy as np
import pytest

from corrop import corrector, fem, mesh, solvers
from corrop.fem import Field
from corrop.mesh import BoundaryTag
from corrop.solvers import LinearSolveConfig, NewtonConfig


def _direction(space, seed=3):
    w = np.random.default_rng(seed).standard_normal(space.ndof)
    w[space.dirichlet_dofs] = 0.0
    return Field(space, w / np.linalg.norm(w))


def test_fixed_point(p1_state):
    problem, space, m, u_star = p1_state
    res = corrector.correct(problem, m, u_star)
    rel = np.linalg.norm(res.u_corrected.coeffs - u_star.coeffs) / np.linalg.norm(u_star.coeffs)
    assert rel <= 1e-8
    assert np.array_equal(res.u_corrected.coeffs, u_star.coeffs + res.update.coeffs)


def test_correction_from_zero_matches_first_newton_step(p1_state):
    problem, space, m, _ = p1_state
    linear = LinearSolveConfig()
    res = corrector.correct(problem, m, Field.zeros(space), linear)

    # rerun the solver so it stops right after its first full update
    _, stats = solvers.newton_solve(problem, m, Field.zeros(space))
    stop_early = NewtonConfig(residual_tol=stats[1] * (1.0 + 1e-12), line_search=False, linear=linear)
    first_iterate, short_stats = solvers.newton_solve(problem, m, Field.zeros(space), stop_early)
    assert len(short_stats) == 2
    assert np.array_equal(res.u_corrected.coeffs, first_iterate.coeffs)


def test_repairs_boundary_violation(p1_state):
    problem, space, m, u_star = p1_state
    bad = Field(space, u_star.coeffs + 0.5)   # violates the clamped edge
    res = corrector.correct(problem, m, bad)
    assert np.all(res.u_corrected.coeffs[space.dirichlet_dofs] == 0.0)
    assert res.residual_after < res.residual_before


def test_correct_k_single_step_matches_correct(p1_state):
    problem, space, m, u_star = p1_state
    u_tilde = Field(space, u_star.coeffs + 0.1 * _direction(space).coeffs)
    one = corrector.correct(problem, m, u_tilde)
    seq = corrector.correct_k(problem, m, u_tilde, 1)
    assert len(seq) == 1
    assert np.array_equal(one.u_corrected.coeffs, seq[0].u_corrected.coeffs)


def test_correct_k_matches_newton_iterates(p1_state):
    problem, space, m, _ = p1_state
    linear = LinearSolveConfig()
    seq = corrector.correct_k(problem, m, Field.zeros(space), 2, linear)

    _, stats = solvers.newton_solve(problem, m, Field.zeros(space))
    stop_after_two = NewtonConfig(residual_tol=stats[2] * (1.0 + 1e-12), line_search=False, linear=linear)
    second_iterate, short_stats = solvers.newton_solve(problem, m, Field.zeros(space), stop_after_two)
    assert len(short_stats) == 3
    assert np.array_equal(seq[-1].u_corrected.coeffs, second_iterate.coeffs)


def test_correct_k_quadratic_residual_decay(p1_state):
    problem, space, m, u_star = p1_state
    u_tilde = Field(space, u_star.coeffs + 0.2 * _direction(space, seed=9).coeffs)
    seq = corrector.correct_k(problem, m, u_tilde, 3)
    norms = [seq[0].residual_before] + [r.residual_after for r in seq]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    # once inside the contraction region each step roughly squares the residual
    assert norms[2] <= 10.0 * norms[1] ** 2


def test_correct_k_rejects_bad_count(p1_state):
    problem, space, m, u_star = p1_state
    with pytest.raises(ValueError):
        corrector.correct_k(problem, m, u_star, 0)


@pytest.fixture(scope="module")
def p2_state():
    problem = fem.problem2()
    space = fem.make_space(mesh.build_voided_square_tri(0.05), problem)
    m = Field.constant(space, 0.3)
    u_star, _ = solvers.newton_solve(
        problem, m, Field.zeros(space), NewtonConfig(residual_tol=1e-13)
    )
    return problem, space, m, u_star


def test_qoi_estimate_vanishes_at_solution(p2_state):
    problem, space, m, u_star = p2_state
    est = corrector.estimate_qoi_error(problem, m, u_star)
    assert abs(est) <= 1e-10


def test_qoi_estimate_exact_for_linear_problem(p2_state):
    _, space, m, _ = p2_state
    linear = fem.ProblemDef(
        problem_id="p2",
        diffusivity="identity",
        alpha=0.0,
        flux=((BoundaryTag.OUTER, 0.1),),
        dirichlet_tags=(BoundaryTag.INNER,),
        m_lower=1e-3,
    )
    u_star, _ = solvers.newton_solve(linear, m, Field.zeros(space), NewtonConfig(residual_tol=1e-13))
    u_tilde = Field(space, u_star.coeffs + 0.3 * _direction(space, seed=4).coeffs)
    exact = (
        fem.boundary_integral(u_star, BoundaryTag.OUTER, 0.1)
        - fem.boundary_integral(u_tilde, BoundaryTag.OUTER, 0.1)
    )
    est = corrector.estimate_qoi_error(linear, m, u_tilde)
    assert abs(est - exact) <= 1e-8 * abs(exact)


def test_qoi_estimate_consistency(p2_state):
    problem, space, m, u_star = p2_state
    w = _direction(space, seed=5)
    rels = []
    for eps in (1e-1, 1e-2, 1e-3):
        u_tilde = Field(space, u_star.coeffs + eps * w.coeffs)
        exact = (
            fem.boundary_integral(u_star, BoundaryTag.OUTER, 0.1)
            - fem.boundary_integral(u_tilde, BoundaryTag.OUTER, 0.1)
        )
        est = corrector.estimate_qoi_error(problem, m, u_tilde)
        rels.append(abs(est - exact) / abs(exact))
    assert rels[0] > rels[1] > rels[2]


def test_qoi_estimate_needs_outer_flux(p1_state):
    problem, space, m, u_star = p1_state
    with pytest.raises(ValueError):
        corrector.estimate_qoi_error(problem, m, u_star)


def test_probe_rows_and_fixed_point(p1_state):
    problem, space, m, _ = p1_state
    rows = corrector.error_scaling_probe(problem, m, _direction(space), [1e-2, 0.0])
    assert rows[0][1] == pytest.approx(1e-2)
    assert rows[1][2] <= 1e-10     # unperturbed input comes back unchanged


def test_probe_halving_quarters_error(p1_state):
    problem, space, m, _ = p1_state
    rows = corrector.error_scaling_probe(problem, m, _direction(space, seed=6), [2e-2, 1e-2])
    ratio = rows[0][2] / rows[1][2]
    assert 3.0 <= ratio <= 5.0


def test_probe_monotone_residual(p1_state):
    problem, space, m, u_star = p1_state
    for eps in (1e-1, 1e-2, 3e-3):
        u_tilde = Field(space, u_star.coeffs + eps * _direction(space, seed=7).coeffs)
        res = corrector.correct(problem, m, u_tilde)
        assert res.residual_after < res.residual_before


def test_probe_rejects_bad_direction(p1_state):
    problem, space, m, _ = p1_state
    with pytest.raises(ValueError):
        corrector.error_scaling_probe(problem, m, Field.zeros(space), [1e-2])
    bad = Field.constant(space, 1.0)   # nonzero on the clamped edge
    if len(space.dirichlet_dofs):
        with pytest.raises(ValueError):
            corrector.error_scaling_probe(problem, m, bad, [1e-2])
