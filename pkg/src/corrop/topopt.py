"""Compliance-minimizing diffusivity optimization with interchangeable forwards.

A bi-level fixed-point scheme: the outer loop alternates a pointwise update
of the diffusivity field with a fresh forward solve, the inner loop finds the
multiplier that pins the volume average of the updated field to the target by
bracketing (halving/doubling) followed by bisection. The forward solve is
pluggable: the full nonlinear solve, a surrogate prediction, or a surrogate
prediction followed by one correction solve. Compliance and the flux energy
that drives the update always come from the active forward's state, which is
exactly what makes the three variants comparable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fem, network
from .corrector import correct
from .fem import Field, FunctionSpace, ProblemDef
from .mesh import BoundaryTag
from .solvers import ConvergenceError, LinearSolveConfig, NewtonConfig, newton_solve


@dataclass(frozen=True)
class TopOptConfig:
    eta: float = 0.4           # target volume average
    m_lower: float = 0.001
    m_tol: float = 0.005       # relative volume-constraint tolerance
    gamma_tol: float = 1e-3    # outer stop: L2 change of the field
    n_max: int = 200
    lambda0: float = 1.0
    m0: float = 0.1
    forward_mode: str = "fem"  # fem | nn | nn_corrected
    max_bracket: int = 60
    max_bisect: int = 200

    def __post_init__(self):
        if not 0.0 < self.m_lower < self.eta <= 1.0:
            raise ValueError("need 0 < m_lower < eta <= 1")
        if min(self.m_tol, self.gamma_tol) <= 0.0:
            raise ValueError("tolerances must be positive")


@dataclass
class TopOptResult:
    m: Field
    u: Field
    lam: float
    history: list      # (compliance, volume average, lambda) per recorded state
    converged: bool
    iterations: int


def _outer_flux(problem: ProblemDef) -> float:
    g = dict(problem.flux).get(BoundaryTag.OUTER)
    if g is None or callable(g):
        raise ValueError("compliance needs a constant flux on the outer boundary")
    return float(g)


def compliance(problem: ProblemDef, u: Field) -> float:
    """Boundary working of the prescribed flux against the state."""
    return fem.boundary_integral(u, BoundaryTag.OUTER, weight=_outer_flux(problem))


def compliance_volumetric(problem: ProblemDef, m: Field, u: Field) -> float:
    """Volume form of the compliance, m*|grad u|^2 + u^4 integrated by quadrature.

    Agrees with the boundary form whenever u solves the forward problem at m
    (test the weak form with the state itself), so the mismatch of the two
    forms measures how far u is from solving.
    """
    space = u.space
    u_q = space.values_at_qp(u.coeffs)
    m_q = space.values_at_qp(m.coeffs)
    gu = np.einsum("eqid,ei->eqd", space.grad_q, space.gather(u.coeffs))
    integrand = problem.kappa0 * m_q * np.sum(gu**2, axis=2) + u_q**4
    return float(np.sum(space.wdet * integrand))


def flux_energy(m: Field, u: Field) -> Field:
    """Squared flux magnitude |m grad u|^2 as a nodal field.

    Sampled once per element (coefficients at the centroid, the element
    gradient at the quadrature barycenter) and then projected to nodes with
    lumped-mass weights, which keeps the result nonnegative.
    """
    space = u.space
    gu = np.einsum("eqid,ei->eqd", space.grad_q, space.gather(u.coeffs)).mean(axis=1)
    m_mid = space.gather(m.coeffs).mean(axis=1)
    e_elem = (m_mid**2) * np.sum(gu**2, axis=1)

    nen = space.conn.shape[1]
    psi_weight = space.wdet.sum(axis=1)[:, None] / nen * np.ones((1, nen))
    numer = np.bincount(space.conn.ravel(), weights=(psi_weight * e_elem[:, None]).ravel(), minlength=space.ndof)
    denom = np.bincount(space.conn.ravel(), weights=psi_weight.ravel(), minlength=space.ndof)
    return Field(space, numer / denom)


def update_m(e: Field, lam: float, m_lower: float = 0.001) -> Field:
    """Pointwise update min(1, max(m_lower, sqrt(e/lambda)))."""
    if lam <= 0.0:
        raise ValueError("multiplier must be positive")
    if np.any(e.coeffs < 0.0):
        raise ValueError("flux energy must be nonnegative")
    return Field(e.space, np.clip(np.sqrt(e.coeffs / lam), m_lower, 1.0))


def volume_average(field: Field) -> float:
    w = field.space.lumped_mass()
    return float(w @ field.coeffs / w.sum())


def inner_iteration(
    m_k: Field,
    lam_k: float,
    u_k: Field,
    cfg: TopOptConfig,
    energy: Field | None = None,
) -> tuple[Field, float]:
    """Volume-constrained update of (m, lambda) at a frozen state u_k.

    The flux energy is held fixed throughout (computed from (m_k, u_k) unless
    supplied), so the updated field depends on lambda alone; the loop
    brackets the target volume average by halving/doubling and then bisects
    until |mbar - eta| <= eta * m_tol. Both bracket endpoints come from
    actual update evaluations, starting at the incoming lambda: deciding the
    branch from the stale field's average instead can place the root outside
    the bracket once the energy has changed, and the bisection then stalls.
    """
    e = energy if energy is not None else flux_energy(m_k, u_k)
    lam = lam_k
    m_cur = update_m(e, lam, cfg.m_lower)
    mbar = volume_average(m_cur)

    if mbar < cfg.eta:
        lam_low_side = lam       # produces too little material
        for _ in range(cfg.max_bracket):
            lam *= 0.5
            m_cur = update_m(e, lam, cfg.m_lower)
            mbar = volume_average(m_cur)
            if mbar >= cfg.eta:
                break
        if mbar < cfg.eta:
            raise ConvergenceError(
                "volume bracketing failed while inflating the field; flux energy is degenerate"
            )
        lam_high_side = lam      # produces enough material
    else:
        lam_high_side = lam
        for _ in range(cfg.max_bracket):
            if not mbar > cfg.eta:
                break
            lam *= 2.0
            m_cur = update_m(e, lam, cfg.m_lower)
            mbar = volume_average(m_cur)
        if mbar > cfg.eta:
            raise ConvergenceError(
                "volume bracketing failed while deflating the field; flux energy is degenerate"
            )
        lam_low_side = lam

    # refine to lambda-interval convergence rather than stopping on the first
    # average inside the tolerance band: a loose early exit lands alternately
    # above and below the target, which feeds a limit cycle of the outer loop
    for _ in range(cfg.max_bisect):
        if abs(lam_low_side - lam_high_side) <= 1e-9 * max(lam_low_side, lam_high_side):
            break
        lam = 0.5 * (lam_low_side + lam_high_side)
        m_cur = update_m(e, lam, cfg.m_lower)
        mbar = volume_average(m_cur)
        if mbar < cfg.eta:
            lam_low_side = lam
        else:
            lam_high_side = lam
    if abs(mbar - cfg.eta) > cfg.eta * cfg.m_tol:
        raise ConvergenceError("volume bisection did not reach the constraint tolerance")
    return m_cur, lam


def make_forward(
    mode: str,
    problem: ProblemDef,
    space: FunctionSpace,
    weights: network.SurrogateWeights | None = None,
    newton: NewtonConfig | None = None,
    linear: LinearSolveConfig | None = None,
) -> Callable[[Field], Field]:
    """Forward-state evaluator for one optimization mode."""
    if mode == "fem":
        cfg = newton or NewtonConfig()

        def fwd(m: Field) -> Field:
            return newton_solve(problem, m, Field.zeros(space), cfg)[0]

        return fwd
    if mode in ("nn", "nn_corrected"):
        if weights is None:
            raise ValueError(f"mode {mode!r} needs trained surrogate weights")
        if mode == "nn":
            return lambda m: Field(space, network.forward(weights, m.coeffs))

        def fwd_corrected(m: Field) -> Field:
            u_nn = Field(space, network.forward(weights, m.coeffs))
            return correct(problem, m, u_nn, linear).u_corrected

        return fwd_corrected
    raise ValueError(f"unknown forward mode {mode!r}")


def outer_iteration(
    problem: ProblemDef,
    space: FunctionSpace,
    cfg: TopOptConfig,
    forward: Callable[[Field], Field],
) -> TopOptResult:
    """Alternate the constrained field update with forward solves.

    Stops when the L2 change of the field drops below gamma_tol, or after
    n_max steps (returned with converged=False rather than raised). The
    history records (compliance, volume average, lambda) for the initial
    state and every outer step.
    """
    m = Field.constant(space, cfg.m0)
    lam = cfg.lambda0
    u = forward(m)
    e = flux_energy(m, u)
    history = [(compliance(problem, u), volume_average(m), lam)]

    for k in range(cfg.n_max):
        m_next, lam = inner_iteration(m, lam, u, cfg, energy=e)
        u = forward(m_next)
        e = flux_energy(m_next, u)
        change = fem.norm(Field(space, m_next.coeffs - m.coeffs), "L2")
        m = m_next
        history.append((compliance(problem, u), volume_average(m), lam))
        if change < cfg.gamma_tol:
            return TopOptResult(m=m, u=u, lam=lam, history=history, converged=True, iterations=k + 1)
    return TopOptResult(m=m, u=u, lam=lam, history=history, converged=False, iterations=cfg.n_max)


def minimizer_errors(
    m_ref: Field,
    m_nn: Field,
    m_nn_corrected: Field,
    u_ref: Field,
    u_nn: Field,
    u_nn_corrected: Field,
) -> tuple[float, float, float, float]:
    """Percentage coefficient errors of the surrogate minimizers and their states.

    The reference state belongs to the reference minimizer; each surrogate
    state is the one its own optimization produced at its own minimizer.
    """
    m_norm = np.linalg.norm(m_ref.coeffs)
    u_norm = np.linalg.norm(u_ref.coeffs)
    if m_norm == 0.0 or u_norm == 0.0:
        raise ValueError("reference minimizer or state has zero norm")
    eps_nn = 100.0 * np.linalg.norm(m_ref.coeffs - m_nn.coeffs) / m_norm
    eps_cnn = 100.0 * np.linalg.norm(m_ref.coeffs - m_nn_corrected.coeffs) / m_norm
    e_nn = 100.0 * np.linalg.norm(u_ref.coeffs - u_nn.coeffs) / u_norm
    e_cnn = 100.0 * np.linalg.norm(u_ref.coeffs - u_nn_corrected.coeffs) / u_norm
    return float(eps_nn), float(eps_cnn), float(e_nn), float(e_cnn)
