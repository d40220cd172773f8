"""Gaussian random-field inputs for data generation.

Samples come from a zero-mean field whose precision-like operator is the
squared elliptic operator gamma*K + delta*M plus a Robin boundary mass term.
One sparse solve against mass-weighted white noise realizes a draw:

    w = A^,-1 (sqrt(lumped mass) * xi),      A = gamma*K + delta*M + eta*M_bd,

which has covariance A^-1 M_lumped A^-1. Per-sample generators are derived
from (seed, sample index), so any subset of draws is reproducible and
independent of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from . import fem
from .fem import Field, FunctionSpace


@dataclass(frozen=True)
class PriorConfig:
    gamma: float = 0.08
    delta: float = 2.0
    eta_robin: float = 1.0 / 1.42
    exponent: int = 2
    seed: int = 0

    def __post_init__(self):
        if min(self.gamma, self.delta, self.eta_robin) <= 0.0:
            raise ValueError("gamma, delta and eta_robin must be positive")
        if self.exponent != 2:
            raise ValueError("only the squared operator (exponent 2) is supported")


def assemble_prior_operator(space: FunctionSpace, cfg: PriorConfig):
    """gamma*K + delta*M + eta*M_boundary over all boundary facets; SPD."""
    A = (
        cfg.gamma * space.unit_stiffness()
        + cfg.delta * space.mass()
        + cfg.eta_robin * fem.assemble_boundary_mass(space)
    )
    return A.tocsr()


def sample(space: FunctionSpace, cfg: PriorConfig, count: int) -> list[Field]:
    """Draw `count` fields; draw j depends only on (cfg.seed, j)."""
    if count < 1:
        raise ValueError("need at least one sample")
    return sample_indices(space, cfg, range(count))


def sample_indices(space: FunctionSpace, cfg: PriorConfig, indices) -> list[Field]:
    A = assemble_prior_operator(space, cfg)
    factor = spla.splu(A.tocsc())
    noise_scale = np.sqrt(space.lumped_mass())
    fields = []
    for j in indices:
        xi = np.random.default_rng([cfg.seed, int(j)]).standard_normal(space.ndof)
        w = factor.solve(noise_scale * xi)
        if not np.all(np.isfinite(w)):
            raise RuntimeError(f"prior solve produced non-finite values for draw {j}")
        fields.append(Field(space, w))
    return fields


def transform_parameter(w: Field, problem_id: str, m_floor: float = 1e-3) -> Field:
    """Map a raw draw w to the model parameter of the given problem.

    The first problem consumes w directly (the exponential sits inside its
    diffusivity), the second uses 0.25 * e^w clamped from below so the
    diffusion coefficient stays admissible.
    """
    if problem_id == "p1":
        return w.copy()
    if problem_id == "p2":
        return Field(w.space, np.maximum(0.25 * np.exp(w.coeffs), m_floor))
    raise ValueError(f"unknown problem id {problem_id!r}")
