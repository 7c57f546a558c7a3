"""Sparse Cholesky factorization of SPD matrices."""
import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .. import _kernels
from ..errors import DimensionError, NotPositiveDefiniteError
from ..mesh import SparseSpdMatrix
from .ordering import ORDERINGS


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """``q[perm][:, perm] = L @ L.T`` with ``L`` lower triangular (CSC, diagonal first).

    ``perm[k]`` is the original index of the k-th pivot.
    """

    perm: np.ndarray
    Lp: np.ndarray
    Li: np.ndarray
    Lx: np.ndarray
    matrix: object = field(default=None, repr=False)

    @property
    def dimension(self):
        return len(self.perm)

    @property
    def nnz(self):
        return len(self.Lx)

    @property
    def L(self):
        n = self.dimension
        return sp.csc_matrix((self.Lx, self.Li, self.Lp), shape=(n, n))

    @property
    def iperm(self):
        ip = np.empty_like(self.perm)
        ip[self.perm] = np.arange(len(self.perm))
        return ip

    def diagonal(self):
        return self.Lx[self.Lp[:-1]]

    def _check(self, b):
        if b.shape[0] != self.dimension:
            raise DimensionError(f"expected leading dimension {self.dimension}, got {b.shape[0]}")

    def solve(self, b):
        """Return ``q^{-1} b`` for a vector or an (m, r) block."""
        b = np.asarray(b, dtype=np.float64)
        self._check(b)
        y = _kernels.lower_solve(self.Lp, self.Li, self.Lx, b[self.perm])
        y = _kernels.lower_t_solve(self.Lp, self.Li, self.Lx, y)
        out = np.empty_like(y)
        out[self.perm] = y
        return out

    def solve_lt(self, z):
        """Return ``P^T L^{-T} z``: maps white noise to a draw with covariance ``q^{-1}``."""
        z = np.asarray(z, dtype=np.float64)
        self._check(z)
        y = _kernels.lower_t_solve(self.Lp, self.Li, self.Lx, z)
        out = np.empty_like(y)
        out[self.perm] = y
        return out

    def multiply(self, v):
        """Return ``q v`` rebuilt from the factor (two sparse products)."""
        v = np.asarray(v, dtype=np.float64)
        self._check(v)
        L = self.L
        y = L @ (L.T @ v[self.perm])
        out = np.empty_like(y)
        out[self.perm] = y
        return out

    def fingerprint(self):
        h = hashlib.sha256()
        for arr in (self.perm.astype("<i8"), self.Lp.astype("<i8"), self.Li.astype("<i8"), self.Lx.astype("<f8")):
            h.update(arr.tobytes())
        return h.hexdigest()[:16]


def factorize(q, ordering="mindegree"):
    """Sparse Cholesky factor of ``q`` (a :class:`SparseSpdMatrix` or scipy matrix).

    Raises :class:`NotPositiveDefiniteError` with the offending pivot, given
    as an index of the original (unpermuted) matrix.
    """
    if not isinstance(q, SparseSpdMatrix):
        q = SparseSpdMatrix.from_sparse(q)
    n = q.dimension
    full = q.full()
    order_fn = ordering if callable(ordering) else ORDERINGS[ordering]
    perm = order_fn(full)
    perm = np.asarray(perm, dtype=np.int64)
    C = sp.csc_matrix(sp.triu(full[perm][:, perm]))
    C.sort_indices()
    Ap = C.indptr.astype(np.int64)
    Ai = C.indices.astype(np.int64)
    Ax = C.data.astype(np.float64)
    parent = _kernels.etree(n, Ap, Ai)
    counts = _kernels.colcounts(n, Ap, Ai, parent)
    Lp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=Lp[1:])
    Li = np.empty(Lp[-1], dtype=np.int64)
    Lx = np.empty(Lp[-1], dtype=np.float64)
    bad = _kernels.chol_numeric(n, Ap, Ai, Ax, parent, Lp, Li, Lx)
    if bad >= 0:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite: non-positive pivot at index {int(perm[bad])}",
            pivot=int(perm[bad]),
            elimination_step=int(bad),
        )
    return CholeskyFactor(perm, Lp, Li, Lx, full.tocsc())
