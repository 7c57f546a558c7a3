"""Low-to-high fidelity prediction through basis coefficients and ridge regression."""
import time
from dataclasses import dataclass, field

import numpy as np

from .basis.solver import Basis, VectorDiagnostics
from .errors import AlignmentError, DimensionError, InsufficientDataError
from .samples import FieldSamples
from .sparse_la.eigen import LARGEST, extreme_eigenpair

RIDGE_GRID = np.logspace(-6, 2, 33)


def eigen_basis(cov, p, tol=1e-8, max_iter=None, seed=0):
    """Leading ``p`` eigenvectors of the covariance, one deflated Lanczos run each."""
    m = cov.dimension
    if p > m:
        raise DimensionError(f"cannot take {p} eigenvectors in dimension {m}")
    cols = []
    diags = []
    B = np.zeros((m, 0))

    def project(v):
        return v - B @ (B.T @ v) if B.shape[1] else v

    def op(v):
        return project(cov.apply(project(v)))

    for k in range(p):
        t0 = time.perf_counter()
        lam, v = extreme_eigenpair(op, m, LARGEST, tol=tol, max_iter=max_iter,
                                   seed=int(np.random.SeedSequence([seed, k]).generate_state(1)[0]),
                                   project=project)
        for _ in range(2):
            v = project(v)
        v /= np.linalg.norm(v)
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        cols.append(v)
        B = np.column_stack(cols)
        diags.append(VectorDiagnostics(float(lam), 0.0, 0, 0, time.perf_counter() - t0, float(lam)))
    return Basis(B, diags, "equal")


def _vectors(basis):
    return np.asarray(getattr(basis, "vectors", basis), dtype=np.float64)


def encode(samples, basis, mean):
    """Basis coefficients ``B^T (y - mean)``, one row per sample."""
    y = np.asarray(getattr(samples, "values", samples), dtype=np.float64)
    B = _vectors(basis)
    if y.shape[-1] != B.shape[0] or np.shape(mean) != (B.shape[0],):
        raise DimensionError(f"samples have {y.shape[-1]} nodes, basis {B.shape[0]}")
    return (y - mean) @ B


def decode(coeffs, basis, mean, sample_ids=(), label=""):
    B = _vectors(basis)
    u = np.atleast_2d(np.asarray(coeffs, dtype=np.float64))
    if u.shape[1] != B.shape[1] or np.shape(mean) != (B.shape[0],):
        raise DimensionError(f"coefficients have {u.shape[1]} columns, basis {B.shape[1]}")
    return FieldSamples(mean + u @ B.T, sample_ids, label=label)


@dataclass
class PipelineModel:
    low_basis: Basis
    high_basis: Basis
    coef: np.ndarray  # (p_y, p_x)
    intercept: np.ndarray  # (p_y,)
    ridge_penalty: float
    mean_x: np.ndarray
    mean_y: np.ndarray
    gcv_scores: dict = field(default_factory=dict)


def _ridge_solution(X, Y, lam):
    # X, Y centred; returns (p_x, p_y) coefficients via SVD so lam=0 means minimum-norm LS
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    keep = s > s.max() * 1e-12 if s.size else s > 0
    U, s, Vt = U[:, keep], s[keep], Vt[keep]
    d = s / (s * s + lam)
    return Vt.T @ (d[:, None] * (U.T @ Y)), U, s


def ridge_gcv(X, Y, grid=RIDGE_GRID):
    """Shared-penalty ridge GCV scores over ``grid`` for centred design and targets."""
    n = X.shape[0]
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    UtY = U.T @ Y
    resid0 = np.sum(Y * Y) - np.sum(UtY * UtY)
    scores = {}
    for lam in grid:
        shrink = s * s / (s * s + lam)
        fitted_part = np.sum(((1.0 - shrink)[:, None] * UtY) ** 2)
        rss = max(resid0, 0.0) + fitted_part
        dof = 1.0 + shrink.sum()  # intercept counts
        den = (1.0 - dof / n) ** 2
        scores[float(lam)] = rss / n / den if den > 0 and dof < n else np.inf
    return scores


def _align(low, high):
    if set(low.sample_ids) != set(high.sample_ids) or len(low.sample_ids) != len(high.sample_ids):
        raise AlignmentError("low- and high-fidelity sample ids do not match")
    return high.take(low.sample_ids)


def fit_pipeline(train_low, train_high, low_basis, high_basis, ridge_penalty="gcv", grid=RIDGE_GRID):
    """Fit ``u_y = A u_x + c`` between low- and high-fidelity basis coefficients."""
    high = _align(train_low, train_high)
    n = train_low.n
    if n < 2:
        raise InsufficientDataError("need at least two training samples", n=n)
    mean_x = train_low.column_mean()
    mean_y = high.column_mean()
    ux = encode(train_low, low_basis, mean_x)
    uy = encode(high, high_basis, mean_y)
    ux_bar = ux.mean(axis=0)
    uy_bar = uy.mean(axis=0)
    X = ux - ux_bar
    Y = uy - uy_bar
    scores = {}
    if isinstance(ridge_penalty, str):
        if ridge_penalty != "gcv":
            raise ValueError(f"ridge_penalty must be a number or 'gcv', got {ridge_penalty!r}")
        scores = ridge_gcv(X, Y, grid)
        finite = {k: v for k, v in scores.items() if np.isfinite(v)}
        if not finite:
            raise InsufficientDataError("ridge GCV undefined on the whole grid", n=n)
        lam = min(finite, key=lambda k: (finite[k], k))
    else:
        lam = float(ridge_penalty)
        if lam < 0:
            raise ValueError("ridge penalty must be nonnegative")
    coef, _, _ = _ridge_solution(X, Y, lam)
    A = coef.T
    c = uy_bar - A @ ux_bar
    return PipelineModel(low_basis, high_basis, A, c, lam, mean_x, mean_y, scores)


def predict(model, low):
    """High-fidelity predictions ``mean_y + B_y (A B_x^T (x - mean_x) + c)``."""
    ux = encode(low, model.low_basis, model.mean_x)
    uy = ux @ model.coef.T + model.intercept
    return decode(uy, model.high_basis, model.mean_y, getattr(low, "sample_ids", ()), label="predicted")
