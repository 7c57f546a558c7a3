"""Traces of weighted covariances from a Cholesky factor."""
import numpy as np
from scipy.linalg import solve_triangular

from ..errors import DimensionError

TRIANGULAR_INVERSE = "triangular_inverse"
PER_COLUMN_SOLVE = "per_column_solve"


def _column_norms_of_inverse(factor):
    # squared column norms of L^{-1}; column k belongs to original node perm[k]
    Linv = solve_triangular(factor.L.toarray(), np.eye(factor.dimension), lower=True)
    return np.einsum("ij,ij->j", Linv, Linv)


def inverse_diagonal(factor, method=TRIANGULAR_INVERSE, block=256):
    """Diagonal of ``Q^{-1}`` in original node order."""
    m = factor.dimension
    out = np.empty(m)
    if method == TRIANGULAR_INVERSE:
        out[factor.perm] = _column_norms_of_inverse(factor)
    elif method == PER_COLUMN_SOLVE:
        for start in range(0, m, block):
            idx = np.arange(start, min(m, start + block))
            E = np.zeros((m, len(idx)))
            E[idx, np.arange(len(idx))] = 1.0
            out[idx] = factor.solve(E)[idx, np.arange(len(idx))]
    else:
        raise ValueError(f"unknown trace method {method!r}")
    return out


def weighted_trace(factor, w, method=TRIANGULAR_INVERSE):
    """``tr(W Sigma) = sum_j w_j (Q^{-1})_jj``.

    ``triangular_inverse`` forms ``L^{-1}`` once and sums weighted squared
    column norms (the ``||W^{1/2} C^{-1}||^2`` identity); ``per_column_solve``
    reads each diagonal entry off a pair of triangular solves.
    """
    w = np.asarray(getattr(w, "values", w), dtype=np.float64)
    if w.shape != (factor.dimension,):
        raise DimensionError(f"weights must have length {factor.dimension}")
    return float(np.dot(w, inverse_diagonal(factor, method)))
