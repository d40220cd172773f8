"""Residual-corrected neural-operator surrogates for nonlinear diffusion.

The pipeline: build a mesh, sample diffusivity fields from an elliptic
Gaussian prior, solve the forward problem to produce training pairs, reduce
both sides with truncated SVD bases, train a small residual network between
the reduced spaces, and repair any prediction with a single linearized solve.
A compliance-minimizing topology optimization exercises all three forward
variants (full solve, surrogate, corrected surrogate) on the voided-square
problem.
"""

from ._kernels import BACKEND as kernel_backend
from .corrector import CorrectionResult, correct, correct_k, error_scaling_probe, estimate_qoi_error
from .fem import Field, FunctionSpace, ProblemDef, make_space, problem1, problem2
from .grf import PriorConfig, assemble_prior_operator, sample, transform_parameter
from .mesh import BoundaryTag, Mesh, build_unit_square_quad, build_voided_square_tri, classify_boundary, import_gmsh_ascii
from .network import EvalResult, NetConfig, SurrogateWeights, TrainConfig, evaluate, forward, train
from .reduction import DataSet, Projector, compute_svd, decode, encode, reconstruction_error, truncate
from .solvers import ConvergenceError, LinearSolveConfig, NewtonConfig, newton_solve, solve_linear
from .topopt import TopOptConfig, TopOptResult, compliance, flux_energy, inner_iteration, outer_iteration, update_m

__version__ = "0.1.0"

__all__ = [
    "BoundaryTag",
    "ConvergenceError",
    "CorrectionResult",
    "DataSet",
    "EvalResult",
    "Field",
    "FunctionSpace",
    "LinearSolveConfig",
    "Mesh",
    "NetConfig",
    "NewtonConfig",
    "PriorConfig",
    "ProblemDef",
    "Projector",
    "SurrogateWeights",
    "TopOptConfig",
    "TopOptResult",
    "TrainConfig",
    "assemble_prior_operator",
    "build_unit_square_quad",
    "build_voided_square_tri",
    "classify_boundary",
    "compliance",
    "compute_svd",
    "correct",
    "correct_k",
    "decode",
    "encode",
    "error_scaling_probe",
    "estimate_qoi_error",
    "evaluate",
    "flux_energy",
    "forward",
    "import_gmsh_ascii",
    "inner_iteration",
    "kernel_backend",
    "make_space",
    "newton_solve",
    "outer_iteration",
    "problem1",
    "problem2",
    "reconstruction_error",
    "sample",
    "solve_linear",
    "train",
    "transform_parameter",
    "truncate",
    "update_m",
]
