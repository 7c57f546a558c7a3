"""Matrix-free extreme eigenpairs by restarted Lanczos with full reorthogonalisation."""
import numpy as np
from scipy.linalg import eigh_tridiagonal

from ..errors import ConvergenceError

LARGEST = "largest_algebraic"
SMALLEST = "smallest_algebraic"


def canonical_sign(v):
    """Flip ``v`` so its largest-magnitude entry is positive."""
    return -v if v[np.argmax(np.abs(v))] < 0 else v


def _within(resid, lam, tol, scale):
    # relative to |lam|, absolute when lam is negligible next to the operator scale
    ref = abs(lam) if abs(lam) > 1e-12 * scale else 1.0
    return resid <= tol * ref


def extreme_eigenpair(apply, dimension, which=LARGEST, tol=1e-8, max_iter=None,
                      seed=0, v0=None, project=None, ncv=64):
    """Largest or smallest algebraic eigenpair of a symmetric operator.

    Parameters
    ----------
    apply : callable
        ``v -> A v`` for a length-``dimension`` vector.
    which : {"largest_algebraic", "smallest_algebraic"}
    tol : float
        Convergence when ``||A v - lam v|| <= tol * |lam|``.
    max_iter : int, optional
        Budget of operator applications, default ``10 * dimension``.
    project : callable, optional
        Applied to the start vector, e.g. a projector onto an orthogonal
        complement the operator already respects.

    Returns
    -------
    (float, ndarray)
        Eigenvalue and unit eigenvector, sign-canonicalised.
    """
    m = int(dimension)
    if which not in (LARGEST, SMALLEST):
        raise ValueError(f"unknown spectrum end {which!r}")
    sgn = 1.0 if which == LARGEST else -1.0
    budget = 10 * m if max_iter is None else int(max_iter)
    ncv = max(2, min(ncv, m))

    def op(x):
        return sgn * np.asarray(apply(x), dtype=np.float64)

    if v0 is None:
        v = np.random.default_rng(seed).standard_normal(m)
    else:
        v = np.array(v0, dtype=np.float64)
    if project is not None:
        v = project(v)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        raise ValueError("start vector vanishes after projection")
    v /= nv

    used = 0
    best = (np.inf, None, None)
    V = np.empty((m, ncv + 1))
    while used < budget:
        V[:, 0] = v
        alpha = []
        beta = []
        k = 0
        broke = False
        while k < ncv and used < budget:
            w = op(V[:, k])
            used += 1
            a = float(np.dot(V[:, k], w))
            w -= a * V[:, k]
            if k > 0:
                w -= beta[-1] * V[:, k - 1]
            for _ in range(2):
                w -= V[:, :k + 1] @ (V[:, :k + 1].T @ w)
            alpha.append(a)
            b = float(np.linalg.norm(w))
            k += 1
            theta, s = _top_ritz(alpha, beta)
            scale = max(abs(x) for x in alpha) + (max(beta) if beta else 0.0)
            est = abs(b * s[-1])
            if b <= 1e-14 * max(scale, 1e-300):
                broke = True
                break
            if est <= tol * 1e-2 * max(abs(theta), 1e-300):
                break
            beta.append(b)
            V[:, k] = w / b
        theta, s = _top_ritz(alpha, beta[: len(alpha) - 1])
        x = V[:, : len(alpha)] @ s
        x /= np.linalg.norm(x)
        r = op(x)
        used += 1
        lam = float(np.dot(x, r))
        resid = float(np.linalg.norm(r - lam * x))
        if resid < best[0]:
            best = (resid, lam, x)
        if _within(resid, lam, tol, max(abs(lam), scale)):
            return sgn * lam, canonical_sign(x)
        if broke and resid > 0:
            # invariant subspace exhausted; restart from the Ritz vector plus noise
            x = x + 1e-8 * np.random.default_rng(seed + used).standard_normal(m)
            if project is not None:
                x = project(x)
            x /= np.linalg.norm(x)
        v = x
    raise ConvergenceError(
        f"Lanczos did not converge within {budget} operator applications",
        best_residual=float(best[0]),
        eigenvalue=None if best[1] is None else float(sgn * best[1]),
    )


def _top_ritz(alpha, beta):
    a = np.asarray(alpha)
    if len(a) == 1:
        return float(a[0]), np.ones(1)
    vals, vecs = eigh_tridiagonal(a, np.asarray(beta[: len(a) - 1]))
    return float(vals[-1]), vecs[:, -1]
