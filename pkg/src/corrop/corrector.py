"""One-solve correction of approximate states of the nonlinear problem.

Given a parameter m and any approximation u~ of the solution (typically a
surrogate prediction), a single linear variational solve at the linearization
point (m, u~) produces an update e with u_corrected = u~ + e. The corrected
state satisfies the Dirichlet constraints exactly even when u~ violates them,
because the constrained entries of e are forced to cancel the violation.
Applied at the exact solution the map is a fixed point up to solver
tolerance; applied near it the error contracts quadratically, which
error_scaling_probe measures directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem
from .fem import Field, ProblemDef
from .mesh import BoundaryTag
from .solvers import LinearSolveConfig, NewtonConfig, newton_solve, solve_linear


@dataclass(frozen=True)
class CorrectionResult:
    u_corrected: Field
    update: Field                    # the computed correction e
    update_norms: dict               # keys: l2_coeff, L2, H1
    residual_before: float           # full residual vector norm at u~
    residual_after: float            # same at the corrected state


def correct(
    problem: ProblemDef,
    m: Field,
    u_tilde: Field,
    linear: LinearSolveConfig | None = None,
) -> CorrectionResult:
    """Solve the linearized problem at (m, u~) once and add the update."""
    space = u_tilde.space
    r = fem.assemble_residual(problem, m, u_tilde)
    A, rhs = fem.linearized_system(problem, m, u_tilde)
    e = solve_linear(A, rhs, linear)
    e[space.dirichlet_dofs] = rhs[space.dirichlet_dofs]

    update = Field(space, e)
    u_c = Field(space, u_tilde.coeffs + e)
    r_after = fem.assemble_residual(problem, m, u_c)
    return CorrectionResult(
        u_corrected=u_c,
        update=update,
        update_norms={k: fem.norm(update, k) for k in ("l2_coeff", "L2", "H1")},
        residual_before=float(np.linalg.norm(r)),
        residual_after=float(np.linalg.norm(r_after)),
    )


def correct_k(
    problem: ProblemDef,
    m: Field,
    u_tilde: Field,
    k: int,
    linear: LinearSolveConfig | None = None,
) -> list[CorrectionResult]:
    """k-fold composition of the correction; equals k full Newton steps from u~."""
    if k < 1:
        raise ValueError("need at least one correction step")
    results = []
    u = u_tilde
    for _ in range(k):
        res = correct(problem, m, u, linear)
        results.append(res)
        u = res.u_corrected
    return results


def estimate_qoi_error(
    problem: ProblemDef,
    m: Field,
    u_tilde: Field,
    qoi: str = "compliance",
    linear: LinearSolveConfig | None = None,
) -> float:
    """Estimate Q(u) - Q(u~) for the compliance functional.

    Compliance is linear in the state, so its derivative applied to the
    computed update is the boundary flux integral of the update itself.
    """
    if qoi != "compliance":
        raise ValueError(f"unsupported quantity of interest {qoi!r}")
    g = dict(problem.flux).get(BoundaryTag.OUTER)
    if g is None or callable(g):
        raise ValueError("compliance estimate needs a constant flux on the outer boundary")
    res = correct(problem, m, u_tilde, linear)
    return fem.boundary_integral(res.update, BoundaryTag.OUTER, weight=g)


def error_scaling_probe(
    problem: ProblemDef,
    m: Field,
    direction: Field,
    eps_list,
    newton: NewtonConfig | None = None,
    linear: LinearSolveConfig | None = None,
) -> list[tuple[float, float, float]]:
    """Error of the corrected state versus the error of the perturbed input.

    Solves for the reference state u*, then for each eps corrects
    u~ = u* + eps * direction and records (eps, |u* - u~|, |u* - corrected|)
    in the coefficient norm. The log-log slope of the last two columns is
    the measured contraction order (2 for a quadratically convergent
    correction). The direction must vanish on the Dirichlet dofs so the
    input error is not trivially removed by the constraint repair.
    """
    space = direction.space
    if np.any(direction.coeffs[space.dirichlet_dofs] != 0.0):
        raise ValueError("probe direction must vanish on the constrained dofs")
    if not np.any(direction.coeffs):
        raise ValueError("probe direction is zero")

    newton = newton or NewtonConfig(residual_tol=1e-13)
    u_star, _ = newton_solve(problem, m, Field.zeros(space), newton)

    rows = []
    for eps in eps_list:
        u_tilde = Field(space, u_star.coeffs + float(eps) * direction.coeffs)
        res = correct(problem, m, u_tilde, linear)
        err_before = float(np.linalg.norm(u_star.coeffs - u_tilde.coeffs))
        err_after = float(np.linalg.norm(u_star.coeffs - res.u_corrected.coeffs))
        rows.append((float(eps), err_before, err_after))
    return rows
