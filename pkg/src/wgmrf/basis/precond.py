"""Preconditioner for the unit-sphere polish.

Near a unit vector ``u`` the risk Hessian is dominated by
``2 (t S + s W)`` with ``t = u'Wu`` and ``s = u'Su``.  For a GMRF,
``(t S + s W)^{-1}`` is applied exactly through the Woodbury identity

    (Q^{-1} + a W)^{-1} = Q - Q D (I + D Q D)^{-1} D Q,    D = sqrt(a W),

which needs one sparse factorization with the sparsity of ``Q``.
"""
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ..sparse_la import factorize

DENSE_MAX_M = 2000


def curvature_preconditioner(obj, u):
    """Map ``v -> P (t S + s W)^{-1} P v`` for the objective ``obj`` at ``u``, or None."""
    w = obj.w
    t = max(float(np.dot(u, w * u)), 1e-6 * float(w.max()))
    s = float(np.dot(u, obj.sigma_p(u)))
    if not s > 0:
        return None
    cov = obj.cov
    if hasattr(cov, "precision_matrix"):
        Q = cov.precision_matrix()
        d = np.sqrt(s / t * w)
        m = cov.dimension
        inner = sp.identity(m, format="csc") + sp.diags(d) @ Q @ sp.diags(d)
        perm = cov.factor.perm
        F = factorize(inner, ordering=lambda _a: perm)

        def apply(v):
            y = Q @ obj.project(v)
            return obj.project(y - Q @ (d * F.solve(d * y))) / t

        return apply
    if getattr(cov, "kind", None) == "dense" and cov.dimension <= DENSE_MAX_M:
        A = t * cov.matrix + np.diag(s * w)
        A[np.diag_indices_from(A)] += 1e-12 * np.trace(A) / len(A)
        c = sla.cho_factor(A)
        return lambda v: obj.project(sla.cho_solve(c, obj.project(v)))
    return None
