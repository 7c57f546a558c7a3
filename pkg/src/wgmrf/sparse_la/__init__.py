"""Sparse SPD factorisation and the matrix-free operator layer."""
from .cholesky import CholeskyFactor, factorize
from .covariance import (
    CovarianceOperator,
    DenseCovariance,
    EmpiricalCovariance,
    GmrfCovariance,
    cov_apply,
)
from .eigen import LARGEST, SMALLEST, canonical_sign, extreme_eigenpair
from .ordering import minimum_degree
from .trace import PER_COLUMN_SOLVE, TRIANGULAR_INVERSE, inverse_diagonal, weighted_trace

__all__ = [
    "CholeskyFactor",
    "factorize",
    "CovarianceOperator",
    "DenseCovariance",
    "EmpiricalCovariance",
    "GmrfCovariance",
    "cov_apply",
    "LARGEST",
    "SMALLEST",
    "canonical_sign",
    "extreme_eigenpair",
    "minimum_degree",
    "PER_COLUMN_SOLVE",
    "TRIANGULAR_INVERSE",
    "inverse_diagonal",
    "weighted_trace",
]
