"""Pure-numpy element kernels, the fallback when the compiled core is absent.

All kernels take precomputed geometry arrays:
    shape_q : (nq, nen)        reference shape values at the quadrature points
    grad_q  : (E, nq, nen, 2)  physical shape gradients
    wdet    : (E, nq)          quadrature weight times |det J|
and per-element nodal coefficient gathers of shape (E, nen).
"""

import numpy as np


def residual_cells(shape_q, grad_q, wdet, kappa_q, alpha, u_e):
    """Per-element weak-form rows: kappa grad(u).grad(psi) + alpha u^3 psi."""
    u_q = np.einsum("qi,ei->eq", shape_q, u_e)
    gu_q = np.einsum("eqid,ei->eqd", grad_q, u_e)
    flux = np.einsum("eq,eqd,eqjd->ej", wdet * kappa_q, gu_q, grad_q)
    reaction = np.einsum("eq,qj->ej", wdet * (alpha * u_q**3), shape_q)
    return flux + reaction


def jacobian_cells(shape_q, grad_q, wdet, kappa_q, alpha, u_e):
    """Per-element state-derivative blocks: kappa grad(p).grad(psi) + 3 alpha u^2 p psi."""
    u_q = np.einsum("qi,ei->eq", shape_q, u_e)
    diffusion = np.einsum("eq,eqid,eqjd->eij", wdet * kappa_q, grad_q, grad_q)
    reaction = np.einsum("eq,qi,qj->eij", wdet * (3.0 * alpha * u_q**2), shape_q, shape_q)
    return diffusion + reaction


def second_derivative_cells(shape_q, wdet, alpha, u_e, p_e, q_e):
    """Per-element rows of the second state derivative: 6 alpha u p q psi."""
    u_q = np.einsum("qi,ei->eq", shape_q, u_e)
    p_q = np.einsum("qi,ei->eq", shape_q, p_e)
    q_q = np.einsum("qi,ei->eq", shape_q, q_e)
    return np.einsum("eq,qj->ej", wdet * (6.0 * alpha * u_q * p_q * q_q), shape_q)
