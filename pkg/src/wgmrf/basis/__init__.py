"""Weighted basis computation."""
from .lbfgs import LbfgsResult, minimize_lbfgs, strong_wolfe
from .objective import DeflatedObjective
from .solver import (
    Basis,
    SolverOptions,
    VectorDiagnostics,
    compute_basis,
    solve_next_vector,
    starting_point,
)


def risk(obj, b, include_constant=False):
    return obj.risk(b, include_constant)


def gradient(obj, b):
    return obj.gradient(b)


def hessian_vector(obj, b, v):
    return obj.hessian_vector(b, v)


__all__ = [
    "Basis",
    "DeflatedObjective",
    "LbfgsResult",
    "SolverOptions",
    "VectorDiagnostics",
    "compute_basis",
    "gradient",
    "hessian_vector",
    "minimize_lbfgs",
    "risk",
    "solve_next_vector",
    "starting_point",
    "strong_wolfe",
]
