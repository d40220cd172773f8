"""First-order Lagrange spaces and weak-form assembly for nonlinear diffusion.

The model family is

    - div(kappa(m) grad u) + alpha u^3 = f        in the domain,
    u = 0 on the Dirichlet part, kappa(m) du/dn = g on flux boundaries,

with kappa(m) = kappa0 * exp(m) or kappa0 * m depending on the problem. The
residual of the weak form, its first state derivative (a symmetric positive
definite matrix after constraint elimination), and the second state
derivative action are assembled here, together with mass/stiffness matrices,
boundary integrals, and coefficient/L2/H1 norms.

Quadrature is a 6-point degree-4 rule on triangles and 3x3 Gauss on quads,
exact for the quartic u^3*v term of first-order elements; nonlinearities are
applied after interpolating nodal values to the quadrature points.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .mesh import BoundaryTag, Mesh

# degree-4 rule on the reference triangle (weights sum to the area 1/2)
_TRI_A = 0.445948490915965
_TRI_B = 0.091576213509771
_TRI_WA = 0.223381589678011 / 2.0
_TRI_WB = 0.109951743655322 / 2.0
_TRI_POINTS = np.array(
    [
        [_TRI_A, _TRI_A],
        [1.0 - 2.0 * _TRI_A, _TRI_A],
        [_TRI_A, 1.0 - 2.0 * _TRI_A],
        [_TRI_B, _TRI_B],
        [1.0 - 2.0 * _TRI_B, _TRI_B],
        [_TRI_B, 1.0 - 2.0 * _TRI_B],
    ]
)
_TRI_WEIGHTS = np.array([_TRI_WA] * 3 + [_TRI_WB] * 3)

_GAUSS3 = np.array([-np.sqrt(3.0 / 5.0), 0.0, np.sqrt(3.0 / 5.0)])
_GAUSS3_W = np.array([5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
_GAUSS2 = np.array([-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0)])


def _reference_tables(kind: str):
    """Shape values and reference gradients at the quadrature points."""
    if kind == "tri3":
        xi, eta = _TRI_POINTS[:, 0], _TRI_POINTS[:, 1]
        shape = np.column_stack([1.0 - xi - eta, xi, eta])
        grad = np.tile(np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (len(xi), 1, 1))
        return shape, grad, _TRI_WEIGHTS
    if kind == "quad4":
        xi, eta = np.meshgrid(_GAUSS3, _GAUSS3, indexing="ij")
        xi, eta = xi.ravel(), eta.ravel()
        w = np.outer(_GAUSS3_W, _GAUSS3_W).ravel()
        signs = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
        shape = 0.25 * (1.0 + np.outer(xi, signs[:, 0])) * (1.0 + np.outer(eta, signs[:, 1]))
        grad = np.empty((len(xi), 4, 2))
        grad[:, :, 0] = 0.25 * signs[None, :, 0] * (1.0 + np.outer(eta, signs[:, 1]))
        grad[:, :, 1] = 0.25 * signs[None, :, 1] * (1.0 + np.outer(xi, signs[:, 0]))
        return shape, grad, w
    raise ValueError(f"unknown element kind {kind!r}")


class FunctionSpace:
    """First-order Lagrange space with one dof per mesh node.

    Geometry factors (physical shape gradients, quadrature weights times
    Jacobian determinants, quadrature point coordinates) are precomputed once
    and shared by every assembly call on the space.
    """

    def __init__(self, mesh: Mesh, dirichlet_tags: tuple[BoundaryTag, ...] = ()):
        self.mesh = mesh
        self.ndof = mesh.num_nodes
        self.conn = mesh.elements

        if dirichlet_tags:
            tag_set = {int(t) for t in dirichlet_tags}
            picked = np.isin(mesh.facet_tags, sorted(tag_set))
            self.dirichlet_dofs = np.unique(mesh.boundary_facets[picked])
        else:
            self.dirichlet_dofs = np.empty(0, dtype=np.int64)
        self.free_mask = np.ones(self.ndof, dtype=bool)
        self.free_mask[self.dirichlet_dofs] = False

        shape, grad_ref, weights = _reference_tables(mesh.kind)
        coords = mesh.nodes[self.conn]                       # (E, nen, 2)
        jac = np.einsum("eia,qib->eqab", coords, grad_ref)   # dx_a/dxi_b
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        if np.any(det <= 0.0):
            raise ValueError("non-positive Jacobian determinant at a quadrature point")
        inv = np.empty_like(jac)
        inv[..., 0, 0] = jac[..., 1, 1] / det
        inv[..., 0, 1] = -jac[..., 0, 1] / det
        inv[..., 1, 0] = -jac[..., 1, 0] / det
        inv[..., 1, 1] = jac[..., 0, 0] / det

        self.shape_q = shape                                             # (nq, nen)
        self.grad_q = np.ascontiguousarray(np.einsum("qib,eqba->eqia", grad_ref, inv))
        self.wdet = np.ascontiguousarray(weights[None, :] * det)         # (E, nq)
        self.points_q = np.einsum("qi,eia->eqa", shape, coords)          # (E, nq, 2)
        self._mass = None
        self._unit_stiffness = None
        self._lumped = None

    def gather(self, coeffs: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(coeffs[self.conn])

    def values_at_qp(self, coeffs: np.ndarray) -> np.ndarray:
        return np.einsum("qi,ei->eq", self.shape_q, self.gather(coeffs))

    def mass(self) -> sp.csr_matrix:
        if self._mass is None:
            self._mass = assemble_mass(self)
        return self._mass

    def unit_stiffness(self) -> sp.csr_matrix:
        if self._unit_stiffness is None:
            self._unit_stiffness = assemble_stiffness(self)
        return self._unit_stiffness

    def lumped_mass(self) -> np.ndarray:
        if self._lumped is None:
            self._lumped = np.asarray(self.mass().sum(axis=1)).ravel()
        return self._lumped


@dataclass
class Field:
    """Nodal coefficient vector on a function space."""

    space: FunctionSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.shape != (self.space.ndof,):
            raise ValueError(
                f"coefficient length {self.coeffs.shape} does not match the space ({self.space.ndof})"
            )

    @classmethod
    def zeros(cls, space: FunctionSpace) -> "Field":
        return cls(space, np.zeros(space.ndof))

    @classmethod
    def constant(cls, space: FunctionSpace, value: float) -> "Field":
        return cls(space, np.full(space.ndof, float(value)))

    @classmethod
    def from_callable(cls, space: FunctionSpace, fn: Callable) -> "Field":
        return cls(space, np.asarray(fn(space.mesh.nodes), dtype=np.float64))

    def copy(self) -> "Field":
        return Field(self.space, self.coeffs.copy())


@dataclass(frozen=True)
class ProblemDef:
    """Coefficients, data, and constraint location of one model problem."""

    problem_id: str
    diffusivity: str = "exp"          # "exp": kappa0*e^m, "identity": kappa0*m
    kappa0: float = 1.0
    alpha: float = 1.0
    source: Callable | None = None
    flux: tuple[tuple[BoundaryTag, float | Callable], ...] = ()
    dirichlet_tags: tuple[BoundaryTag, ...] = ()
    m_lower: float = 0.0              # admissibility floor for "identity" diffusivity


def _source_p1(x: np.ndarray) -> np.ndarray:
    return np.exp(-4.0 * (1.0 - x[..., 0]) ** 2) * np.sin(4.0 * np.pi * x[..., 1]) ** 2


def problem1() -> ProblemDef:
    """Unit square, log-diffusivity e^m, fixed heat source, clamped bottom edge."""
    return ProblemDef(
        problem_id="p1",
        diffusivity="exp",
        source=_source_p1,
        dirichlet_tags=(BoundaryTag.BOTTOM,),
    )


def problem2() -> ProblemDef:
    """Voided square, diffusivity m, constant influx 0.1 outside, clamped voids."""
    return ProblemDef(
        problem_id="p2",
        diffusivity="identity",
        source=None,
        flux=((BoundaryTag.OUTER, 0.1),),
        dirichlet_tags=(BoundaryTag.INNER,),
        m_lower=1e-3,
    )


def make_space(mesh: Mesh, problem: ProblemDef) -> FunctionSpace:
    return FunctionSpace(mesh, problem.dirichlet_tags)


def _check_pair(m: Field, u: Field) -> FunctionSpace:
    if m.space is not u.space:
        raise ValueError("parameter and state live on different spaces")
    for f in (m, u):
        if not np.all(np.isfinite(f.coeffs)):
            raise ValueError("non-finite field coefficients")
    return u.space


def diffusivity_at_qp(problem: ProblemDef, m: Field) -> np.ndarray:
    m_q = m.space.values_at_qp(m.coeffs)
    if problem.diffusivity == "exp":
        return problem.kappa0 * np.exp(m_q)
    if problem.diffusivity == "identity":
        if m_q.min() <= 0.0:
            raise ValueError("diffusivity must be positive everywhere it is evaluated")
        return problem.kappa0 * m_q
    raise ValueError(f"unknown diffusivity transform {problem.diffusivity!r}")


def _scatter_rows(space: FunctionSpace, cells: np.ndarray) -> np.ndarray:
    return np.bincount(space.conn.ravel(), weights=cells.ravel(), minlength=space.ndof)


def _scatter_matrix(space: FunctionSpace, cells: np.ndarray) -> sp.csr_matrix:
    nen = space.conn.shape[1]
    rows = np.repeat(space.conn, nen, axis=1).ravel()
    cols = np.tile(space.conn, (1, nen)).ravel()
    mat = sp.coo_matrix((cells.ravel(), (rows, cols)), shape=(space.ndof, space.ndof))
    return mat.tocsr()


def assemble_load(problem: ProblemDef, space: FunctionSpace) -> np.ndarray:
    """Right-hand side functional: volume source plus declared boundary fluxes."""
    vec = np.zeros(space.ndof)
    if problem.source is not None:
        f_q = np.asarray(problem.source(space.points_q), dtype=np.float64)
        vec += _scatter_rows(space, np.einsum("eq,qi->ei", space.wdet * f_q, space.shape_q))
    for tag, g in problem.flux:
        vec += boundary_load(space, tag, g)
    return vec


def assemble_residual(problem: ProblemDef, m: Field, u: Field) -> np.ndarray:
    """Weak-form residual; entries at constrained dofs report the violation u_i - 0."""
    space = _check_pair(m, u)
    kappa_q = diffusivity_at_qp(problem, m)
    cells = _kernels.residual_cells(
        space.shape_q, space.grad_q, space.wdet, kappa_q, problem.alpha, space.gather(u.coeffs)
    )
    r = _scatter_rows(space, cells) - assemble_load(problem, space)
    r[space.dirichlet_dofs] = u.coeffs[space.dirichlet_dofs]
    return r


def _jacobian_raw(problem: ProblemDef, m: Field, u: Field) -> sp.csr_matrix:
    space = _check_pair(m, u)
    kappa_q = diffusivity_at_qp(problem, m)
    cells = _kernels.jacobian_cells(
        space.shape_q, space.grad_q, space.wdet, kappa_q, problem.alpha, space.gather(u.coeffs)
    )
    return _scatter_matrix(space, cells)


def _eliminate(A: sp.csr_matrix, dirichlet: np.ndarray, ndof: int) -> sp.csr_matrix:
    keep = np.ones(ndof)
    keep[dirichlet] = 0.0
    proj = sp.diags(keep)
    out = (proj @ A @ proj + sp.diags(1.0 - keep)).tocsr()
    out.eliminate_zeros()
    return out


def assemble_jacobian(problem: ProblemDef, m: Field, u: Field) -> sp.csr_matrix:
    """State derivative of the residual, Dirichlet rows/columns replaced by identity."""
    A = _jacobian_raw(problem, m, u)
    return _eliminate(A, u.space.dirichlet_dofs, u.space.ndof)


def linearized_system(problem: ProblemDef, m: Field, u: Field):
    """One-step correction system at (m, u): A_bc * delta = rhs.

    The prescribed increment on constrained dofs is -u there (restoring the
    homogeneous Dirichlet value even when u violates it), and the free rows
    carry the usual symmetric-elimination coupling adjustment.
    """
    space = u.space
    r = assemble_residual(problem, m, u)
    raw = _jacobian_raw(problem, m, u)
    rhs = -r
    if len(space.dirichlet_dofs):
        lifted = np.zeros(space.ndof)
        lifted[space.dirichlet_dofs] = -u.coeffs[space.dirichlet_dofs]
        rhs -= raw @ lifted
        rhs[space.dirichlet_dofs] = -u.coeffs[space.dirichlet_dofs]
    return _eliminate(raw, space.dirichlet_dofs, space.ndof), rhs


def apply_second_derivative(problem: ProblemDef, m: Field, u: Field, p: Field, q: Field) -> np.ndarray:
    """Second state derivative action, rows of 6 alpha u p q psi_i.

    The diffusion term is linear in the state, so only the reaction part
    survives; m enters the operator's base point but not the value.
    """
    space = _check_pair(m, u)
    for f in (p, q):
        if f.space is not space:
            raise ValueError("direction fields live on a different space")
    cells = _kernels.second_derivative_cells(
        space.shape_q,
        space.wdet,
        problem.alpha,
        space.gather(u.coeffs),
        space.gather(p.coeffs),
        space.gather(q.coeffs),
    )
    vec = _scatter_rows(space, cells)
    vec[space.dirichlet_dofs] = 0.0
    return vec


def assemble_mass(space: FunctionSpace) -> sp.csr_matrix:
    cells = np.einsum("eq,qi,qj->eij", space.wdet, space.shape_q, space.shape_q)
    return _scatter_matrix(space, cells)


def assemble_stiffness(space: FunctionSpace, coefficient: Field | float | None = None) -> sp.csr_matrix:
    if coefficient is None:
        c_q = np.ones_like(space.wdet)
    elif isinstance(coefficient, Field):
        c_q = space.values_at_qp(coefficient.coeffs)
    else:
        c_q = np.full_like(space.wdet, float(coefficient))
    cells = np.einsum("eq,eqid,eqjd->eij", space.wdet * c_q, space.grad_q, space.grad_q)
    return _scatter_matrix(space, cells)


def _facet_quadrature(mesh: Mesh, facets: np.ndarray):
    """Two-point Gauss data per facet: points (F, 2, 2) and weights (F, 2)."""
    a = mesh.nodes[facets[:, 0]]
    b = mesh.nodes[facets[:, 1]]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = mid[:, None, :] + _GAUSS2[None, :, None] * half[:, None, :]
    lengths = np.linalg.norm(b - a, axis=1)
    weights = 0.5 * lengths[:, None] * np.ones((1, 2))
    shape = np.column_stack([0.5 * (1.0 - _GAUSS2), 0.5 * (1.0 + _GAUSS2)])  # (2 pts, 2 ends)
    return pts, weights, shape


def assemble_boundary_mass(space: FunctionSpace, tags: tuple[BoundaryTag, ...] | None = None) -> sp.csr_matrix:
    """Facet mass matrix over the selected (default: all) boundary facets."""
    mesh = space.mesh
    if tags is None:
        facets = mesh.boundary_facets
    else:
        picked = np.isin(mesh.facet_tags, [int(t) for t in tags])
        facets = mesh.boundary_facets[picked]
    pts, weights, shape = _facet_quadrature(mesh, facets)
    cells = np.einsum("fp,pi,pj->fij", weights, shape, shape)
    rows = np.repeat(facets, 2, axis=1).ravel()
    cols = np.tile(facets, (1, 2)).ravel()
    mat = sp.coo_matrix((cells.ravel(), (rows, cols)), shape=(space.ndof, space.ndof))
    return mat.tocsr()


def _facets_for_tag(mesh: Mesh, tag: BoundaryTag) -> np.ndarray:
    facets = mesh.facets_with_tag(tag)
    if len(facets) == 0:
        raise ValueError(f"mesh has no boundary facets tagged {BoundaryTag(tag).name}")
    return facets


def boundary_load(space: FunctionSpace, tag: BoundaryTag, g: float | Callable) -> np.ndarray:
    """Flux functional on one tag: entries are the facet integrals of g psi_i."""
    facets = _facets_for_tag(space.mesh, tag)
    pts, weights, shape = _facet_quadrature(space.mesh, facets)
    g_val = np.asarray(g(pts), dtype=np.float64) if callable(g) else np.full(weights.shape, float(g))
    cells = np.einsum("fp,pi->fi", weights * g_val, shape)
    return np.bincount(facets.ravel(), weights=cells.ravel(), minlength=space.ndof)


def boundary_integral(field: Field, tag: BoundaryTag, weight: float = 1.0) -> float:
    """Facet integral of weight * field over one boundary tag."""
    facets = _facets_for_tag(field.space.mesh, tag)
    pts, weights, shape = _facet_quadrature(field.space.mesh, facets)
    vals = field.coeffs[facets]                       # (F, 2) endpoint values
    u_q = np.einsum("pi,fi->fp", shape, vals)
    return float(weight * np.sum(weights * u_q))


def norm(field: Field, kind: str = "l2_coeff") -> float:
    """Coefficient, L2, or H1 norm of a field."""
    c = field.coeffs
    if kind == "l2_coeff":
        return float(np.linalg.norm(c))
    if kind == "L2":
        return float(np.sqrt(c @ (field.space.mass() @ c)))
    if kind == "H1":
        A = field.space.mass() + field.space.unit_stiffness()
        return float(np.sqrt(c @ (A @ c)))
    raise ValueError(f"unknown norm kind {kind!r}")


def free_residual_norm(space: FunctionSpace, residual: np.ndarray) -> float:
    return float(np.linalg.norm(residual[space.free_mask]))
