"""Numerical verification of zero-duality-gap certificates for a Ginzburg-Landau type energy."""

from .grid import DIRICHLET, NEUMANN, GridSpec, LinOp, ScalarField, laplacian
from .primal import CriticalPoint, GLParams, eval_J, grad_J, solve_critical

__all__ = [
    "DIRICHLET",
    "NEUMANN",
    "CriticalPoint",
    "GLParams",
    "GridSpec",
    "LinOp",
    "ScalarField",
    "eval_J",
    "grad_J",
    "laplacian",
    "solve_critical",
]
