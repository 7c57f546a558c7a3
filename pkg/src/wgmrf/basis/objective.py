"""Weighted compression risk of a candidate basis vector, with deflation.

For covariance ``S``, weights ``W = diag(w)`` and previous orthonormal
columns ``B``, let ``P = I - B B^T`` and ``S_p = P S P``.  Then

    R_p(b) = tr(W S_p) - 2 b^T W S_p b + (b^T W b)(b^T S_p b)

equals ``tr(W (I - b b^T) S_p (I - b b^T))`` for unit ``b``.
"""
import numpy as np

from ..errors import DimensionError


class DeflatedObjective:
    """Risk, gradient and Hessian-vector products for the next basis vector.

    Every product with ``S_p`` is project / apply / project, so nothing
    m-by-m is ever formed.
    """

    def __init__(self, cov, weights, previous=None, base_trace=None):
        self.cov = cov
        w = np.asarray(getattr(weights, "values", weights), dtype=np.float64)
        if w.shape != (cov.dimension,):
            raise DimensionError(f"weights have length {w.shape}, covariance dimension {cov.dimension}")
        self.w = w
        m = cov.dimension
        B = np.zeros((m, 0)) if previous is None else np.asarray(previous, dtype=np.float64).reshape(m, -1)
        self.B = B
        self._base_trace = base_trace
        self._constant = None

    @property
    def dimension(self):
        return self.cov.dimension

    @property
    def uniform_weights(self):
        """Equal weights reduce the problem to an eigenproblem with a globally optimal start."""
        return bool(np.ptp(self.w) == 0.0)

    @property
    def p(self):
        return self.B.shape[1]

    def project(self, v):
        if self.p == 0:
            return v
        return v - self.B @ (self.B.T @ v)

    def sigma_p(self, v):
        return self.project(self.cov.apply(self.project(v)))

    def operator(self, v):
        """``P (W S_p + S_p W) P v``; its top eigenvector seeds the optimiser."""
        v = self.project(v)
        return self.project(self.w * self.sigma_p(v) + self.sigma_p(self.w * v))

    def constant(self):
        """``tr(W S_p)`` via ``tr(W S) - 2 tr(B^T S W B) + tr(B^T W B B^T S B)``."""
        if self._constant is None:
            c = self._base_trace
            if c is None:
                c = self.cov.weighted_diag_sum(self.w)
            if self.p:
                SB = self.cov.apply(self.B)
                WB = self.w[:, None] * self.B
                c += -2.0 * np.sum(SB * WB) + np.sum((self.B.T @ WB) * (self.B.T @ SB))
            self._constant = float(c)
        return self._constant

    def _check(self, b):
        b = np.asarray(b, dtype=np.float64)
        if b.shape != (self.dimension,):
            raise DimensionError(f"expected vector of length {self.dimension}, got {b.shape}")
        return b

    def risk(self, b, include_constant=False):
        b = self._check(b)
        sb = self.sigma_p(b)
        wb = self.w * b
        val = -2.0 * np.dot(wb, sb) + np.dot(b, wb) * np.dot(b, sb)
        return val + self.constant() if include_constant else float(val)

    def risk_and_gradient(self, b):
        b = self._check(b)
        sb = self.sigma_p(b)
        wb = self.w * b
        swb = self.sigma_p(wb)
        bsb = np.dot(b, sb)
        bwb = np.dot(b, wb)
        f = -2.0 * np.dot(wb, sb) + bwb * bsb
        g = -2.0 * (self.w * sb + swb) + 2.0 * bsb * wb + 2.0 * bwb * sb
        return float(f), g

    def gradient(self, b):
        return self.risk_and_gradient(b)[1]

    def hessian_vector(self, b, v):
        b = self._check(b)
        v = self._check(v)
        sb = self.sigma_p(b)
        sv = self.sigma_p(v)
        wb = self.w * b
        wv = self.w * v
        out = -2.0 * (self.w * sv + self.sigma_p(wv))
        out += 2.0 * np.dot(b, sb) * wv + 2.0 * np.dot(b, wb) * sv
        out += 4.0 * wb * np.dot(sb, v) + 4.0 * sb * np.dot(wb, v)
        return out

    def sphere_risk_and_gradient(self, z):
        """Risk at ``u = P z / ||P z||`` and its gradient with respect to ``z``."""
        pz = self.project(np.asarray(z, dtype=np.float64))
        nz = np.linalg.norm(pz)
        u = pz / nz
        f, g = self.risk_and_gradient(u)
        g = g - np.dot(u, g) * u
        return f, self.project(g) / nz
