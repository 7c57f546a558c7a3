"""Covariance operators: products with Sigma without forming it when possible."""
import numpy as np
import scipy.sparse as sp

from ..errors import DimensionError


class CovarianceOperator:
    """Symmetric PSD operator ``v -> Sigma v``.

    Subclasses implement :meth:`_apply` on an (m,) or (m, r) array and
    :meth:`diagonal`.
    """

    kind = None

    def __init__(self, dimension):
        self.dimension = int(dimension)

    def apply(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape[0] != self.dimension:
            raise DimensionError(f"expected length {self.dimension}, got {v.shape[0]}")
        return self._apply(v)

    __call__ = apply

    def weighted_diag_sum(self, w):
        """``tr(diag(w) Sigma)``; w need not be normalised."""
        return float(np.dot(np.asarray(w, dtype=np.float64), self.diagonal()))

    def todense(self):
        return self.apply(np.eye(self.dimension))


class GmrfCovariance(CovarianceOperator):
    """``Sigma = Q^{-1}`` applied through two triangular solves with the factor."""

    kind = "gmrf"

    def __init__(self, factor):
        super().__init__(factor.dimension)
        self.factor = factor

    def _apply(self, v):
        return self.factor.solve(v)

    def precision_apply(self, v):
        return self.factor.multiply(v)

    def precision_matrix(self):
        """Sparse ``Q`` in the original ordering, rebuilt from ``L`` if it was not kept."""
        f = self.factor
        if f.matrix is not None:
            return f.matrix
        L = f.L
        A = (L @ L.T).tocoo()
        return sp.csc_matrix((A.data, (f.perm[A.row], f.perm[A.col])), shape=A.shape)

    def diagonal(self):
        from .trace import inverse_diagonal

        if not hasattr(self, "_diag"):
            self._diag = inverse_diagonal(self.factor)
        return self._diag


class DenseCovariance(CovarianceOperator):
    kind = "dense"

    def __init__(self, matrix):
        a = np.asarray(matrix, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError("covariance matrix must be square")
        super().__init__(a.shape[0])
        self.matrix = 0.5 * (a + a.T)

    def _apply(self, v):
        return self.matrix @ v

    def diagonal(self):
        return np.diag(self.matrix).copy()


class EmpiricalCovariance(CovarianceOperator):
    """Sample covariance ``Xc^T Xc / (n - 1)`` of a sample matrix, never formed."""

    kind = "empirical"

    def __init__(self, samples):
        values = getattr(samples, "values", samples)
        x = np.asarray(values, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 2:
            raise DimensionError("empirical covariance needs an (n>=2, m) sample matrix")
        super().__init__(x.shape[1])
        self.mean = x.mean(axis=0)
        self.centered = x - self.mean
        self.n = x.shape[0]

    def _apply(self, v):
        return self.centered.T @ (self.centered @ v) / (self.n - 1)

    def diagonal(self):
        return (self.centered ** 2).sum(axis=0) / (self.n - 1)


def cov_apply(op, v):
    return op.apply(v)
