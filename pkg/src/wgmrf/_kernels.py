"""Hot inner loops: sparse Cholesky, triangular solves, graph BFS, smoothing.

Every kernel exists in two forms.  ``*_py`` is the reference loop (also the
source numba compiles); ``*_nb`` is the compiled version.  The public
dispatchers at the bottom pick the compiled loop when
:data:`wgmrf._accel.USE_JIT` is set and a vectorised numpy/scipy route
otherwise.  Triangular factors are stored column-compressed with the
diagonal entry first in every column.
"""
import math
import types

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra
from scipy.sparse.linalg import spsolve_triangular

from . import _accel

# --------------------------------------------------------------------------
# symbolic Cholesky
# --------------------------------------------------------------------------


def etree_py(n, Ap, Ai):
    """Elimination tree of a symmetric matrix given by its upper triangle (CSC)."""
    parent = np.full(n, -1, dtype=np.int64)
    ancestor = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            while i != -1 and i < k:
                inext = ancestor[i]
                ancestor[i] = k
                if inext == -1:
                    parent[i] = k
                i = inext
    return parent


def _ereach_py(Ap, Ai, k, parent, s, w):
    # nonzero pattern of row k of L, topologically ordered in s[top:]
    n = parent.shape[0]
    top = n
    w[k] = k
    for p in range(Ap[k], Ap[k + 1]):
        i = Ai[p]
        if i > k:
            continue
        ln = 0
        while w[i] != k:
            s[ln] = i
            ln += 1
            w[i] = k
            i = parent[i]
        while ln > 0:
            top -= 1
            ln -= 1
            s[top] = s[ln]
    return top


def colcounts_py(n, Ap, Ai, parent):
    counts = np.ones(n, dtype=np.int64)
    s = np.empty(n, dtype=np.int64)
    w = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        top = _ereach_py(Ap, Ai, k, parent, s, w)
        for t in range(top, n):
            counts[s[t]] += 1
    return counts


def chol_numeric_py(n, Ap, Ai, Ax, parent, Lp, Li, Lx):
    """Up-looking numeric factorization into preallocated (Lp, Li, Lx).

    Returns -1 on success, otherwise the index of the first non-positive pivot.
    """
    c = Lp[:n].copy()
    x = np.zeros(n)
    s = np.empty(n, dtype=np.int64)
    w = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        top = _ereach_py(Ap, Ai, k, parent, s, w)
        x[k] = 0.0
        for p in range(Ap[k], Ap[k + 1]):
            if Ai[p] <= k:
                x[Ai[p]] = Ax[p]
        d = x[k]
        x[k] = 0.0
        for t in range(top, n):
            i = s[t]
            lki = x[i] / Lx[Lp[i]]
            x[i] = 0.0
            for p in range(Lp[i] + 1, c[i]):
                x[Li[p]] -= Lx[p] * lki
            d -= lki * lki
            p = c[i]
            c[i] += 1
            Li[p] = k
            Lx[p] = lki
        if d <= 0.0 or not math.isfinite(d):
            return k
        p = c[k]
        c[k] += 1
        Li[p] = k
        Lx[p] = math.sqrt(d)
    return -1


# --------------------------------------------------------------------------
# triangular solves on an (n, r) block, in place
# --------------------------------------------------------------------------


def lsolve_py(Lp, Li, Lx, X):
    n, r = X.shape
    for j in range(n):
        d = Lx[Lp[j]]
        for c in range(r):
            X[j, c] /= d
        for p in range(Lp[j] + 1, Lp[j + 1]):
            i = Li[p]
            lij = Lx[p]
            for c in range(r):
                X[i, c] -= lij * X[j, c]


def ltsolve_py(Lp, Li, Lx, X):
    n, r = X.shape
    for j in range(n - 1, -1, -1):
        for p in range(Lp[j] + 1, Lp[j + 1]):
            i = Li[p]
            lij = Lx[p]
            for c in range(r):
                X[j, c] -= lij * X[i, c]
        d = Lx[Lp[j]]
        for c in range(r):
            X[j, c] /= d


# --------------------------------------------------------------------------
# graph kernels
# --------------------------------------------------------------------------


def bfs_py(indptr, indices, source, radius):
    """Hop distances from ``source``; -1 marks nodes beyond ``radius`` (radius<0: unbounded)."""
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    dist[source] = 0
    queue[0] = source
    head = 0
    tail = 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u]
        if radius >= 0 and du >= radius:
            continue
        for p in range(indptr[u], indptr[u + 1]):
            v = indices[p]
            if dist[v] < 0:
                dist[v] = du + 1
                queue[tail] = v
                tail += 1
    return dist


def smooth_py(indptr, indices, f, kvals):
    """Row-normalised truncated kernel average; kvals[d] is the kernel at hop d.

    Returns the smoothed vector and the smoother diagonal S_jj.
    """
    n = indptr.shape[0] - 1
    radius = kvals.shape[0] - 1
    out = np.empty(n)
    diag = np.empty(n)
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for j in range(n):
        dist[j] = 0
        queue[0] = j
        head = 0
        tail = 1
        num = 0.0
        den = 0.0
        while head < tail:
            u = queue[head]
            head += 1
            du = dist[u]
            k = kvals[du]
            num += k * f[u]
            den += k
            if du >= radius:
                continue
            for p in range(indptr[u], indptr[u + 1]):
                v = indices[p]
                if dist[v] < 0:
                    dist[v] = du + 1
                    queue[tail] = v
                    tail += 1
        out[j] = num / den
        diag[j] = kvals[0] / den
        for t in range(tail):
            dist[queue[t]] = -1
    return out, diag


etree_nb = _accel.jit(etree_py)
_ereach_nb = _accel.jit(_ereach_py)
if _accel.NUMBA_AVAILABLE:
    # compiled callers must see the compiled helper
    def _bind(src):
        g = dict(src.__globals__)
        g["_ereach_py"] = _ereach_nb
        return types.FunctionType(src.__code__, g, src.__name__, src.__defaults__)

    colcounts_nb = _accel.jit(_bind(colcounts_py))
    chol_numeric_nb = _accel.jit(_bind(chol_numeric_py))
else:  # pragma: no cover
    colcounts_nb = colcounts_py
    chol_numeric_nb = chol_numeric_py
lsolve_nb = _accel.jit(lsolve_py)
ltsolve_nb = _accel.jit(ltsolve_py)
bfs_nb = _accel.jit(bfs_py)
smooth_nb = _accel.jit(smooth_py)


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------


def etree(n, Ap, Ai):
    return (etree_nb if _accel.USE_JIT else etree_py)(n, Ap, Ai)


def colcounts(n, Ap, Ai, parent):
    return (colcounts_nb if _accel.USE_JIT else colcounts_py)(n, Ap, Ai, parent)


def chol_numeric(n, Ap, Ai, Ax, parent, Lp, Li, Lx):
    return (chol_numeric_nb if _accel.USE_JIT else chol_numeric_py)(n, Ap, Ai, Ax, parent, Lp, Li, Lx)


def _as_block(b):
    X = np.array(b, dtype=np.float64, copy=True)
    vec = X.ndim == 1
    if vec:
        X = X[:, None]
    return np.ascontiguousarray(X), vec


def lower_solve(Lp, Li, Lx, b, use_jit=None):
    """Solve L x = b for a vector or an (n, r) block."""
    use_jit = _accel.USE_JIT if use_jit is None else use_jit
    if use_jit:
        X, vec = _as_block(b)
        lsolve_nb(Lp, Li, Lx, X)
        return X[:, 0] if vec else X
    n = Lp.shape[0] - 1
    L = sp.csr_matrix(sp.csc_matrix((Lx, Li, Lp), shape=(n, n)))
    return spsolve_triangular(L, np.asarray(b, dtype=np.float64), lower=True)


def lower_t_solve(Lp, Li, Lx, b, use_jit=None):
    """Solve L^T x = b for a vector or an (n, r) block."""
    use_jit = _accel.USE_JIT if use_jit is None else use_jit
    if use_jit:
        X, vec = _as_block(b)
        ltsolve_nb(Lp, Li, Lx, X)
        return X[:, 0] if vec else X
    n = Lp.shape[0] - 1
    # CSC of L read as CSR is L^T (upper triangular)
    U = sp.csr_matrix((Lx, Li, Lp), shape=(n, n))
    return spsolve_triangular(U, np.asarray(b, dtype=np.float64), lower=False)


def bfs(indptr, indices, source, radius=-1, use_jit=None):
    use_jit = _accel.USE_JIT if use_jit is None else use_jit
    if use_jit:
        return bfs_nb(indptr, indices, np.int64(source), np.int64(radius))
    n = indptr.shape[0] - 1
    A = sp.csr_matrix((np.ones(len(indices)), indices, indptr), shape=(n, n))
    lim = np.inf if radius < 0 else float(radius)
    d = dijkstra(A, unweighted=True, indices=int(source), limit=lim)
    out = np.full(n, -1, dtype=np.int64)
    ok = np.isfinite(d)
    out[ok] = d[ok].astype(np.int64)
    return out


def smooth(indptr, indices, f, kvals, use_jit=None):
    use_jit = _accel.USE_JIT if use_jit is None else use_jit
    f = np.ascontiguousarray(f, dtype=np.float64)
    kvals = np.ascontiguousarray(kvals, dtype=np.float64)
    if use_jit:
        return smooth_nb(indptr, indices, f, kvals)
    n = indptr.shape[0] - 1
    radius = len(kvals) - 1
    A = sp.csr_matrix((np.ones(len(indices)), indices, indptr), shape=(n, n))
    D = dijkstra(A, unweighted=True, limit=float(radius))
    K = np.zeros_like(D)
    ok = np.isfinite(D)
    K[ok] = kvals[D[ok].astype(np.int64)]
    den = K.sum(axis=1)
    return (K @ f) / den, kvals[0] / den
