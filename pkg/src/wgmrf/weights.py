"""Data-driven node weights: exceedance frequencies smoothed over the mesh."""
import hashlib
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import DegenerateGridError, DimensionError, EmptyWeightsError

KERNEL_FLOOR = 1e-8
GCV_TIE_RTOL = 1e-12
DEFAULT_SIGMA_GRID = (0.5, 1.0, 2.0, 4.0, 8.0)
QUANTILE_PRESETS = (0.001, 0.005)


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Nonnegative node weights summing to one."""

    values: np.ndarray
    quantile_level: Optional[float] = None
    bandwidth: Optional[float] = None
    threshold: Optional[float] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise DimensionError("weights must be a 1-d vector")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(v.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {v.sum()!r}")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def fingerprint(self):
        return hashlib.sha256(self.values.astype("<f8").tobytes()).hexdigest()[:16]

    @classmethod
    def equal(cls, m):
        return cls(np.full(m, 1.0 / m))

    @classmethod
    def normalized(cls, values, **meta):
        v = np.asarray(values, dtype=np.float64)
        v = v / v.sum()
        # exact renormalisation can still miss 1 by an ulp or two
        v[np.argmax(v)] += 1.0 - v.sum()
        return cls(v, **meta)


def pooled_quantile(samples, upper_fraction):
    """Nearest-rank ``1 - upper_fraction`` quantile of all values pooled."""
    values = np.asarray(getattr(samples, "values", samples), dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("no sample values")
    if not 0.0 < upper_fraction < 1.0:
        raise ValueError("upper_fraction must lie in (0, 1)")
    n = values.size
    # tiny slack keeps u*N integral when it should be (0.01*100 -> 1)
    rank = n - int(math.floor(upper_fraction * n + 1e-9))
    rank = min(max(rank, 1), n)
    return float(np.partition(values, rank - 1)[rank - 1])


def exceedance_frequency(samples, q):
    """Per node, the fraction of samples strictly above ``q``."""
    values = np.asarray(getattr(samples, "values", samples), dtype=np.float64)
    return (values > q).mean(axis=0)


def kernel_radius(sigma):
    """Hop radius beyond which the Gaussian kernel drops below 1e-8."""
    return int(math.ceil(sigma * math.sqrt(2.0 * math.log(1.0 / KERNEL_FLOOR))))


def _kernel_values(sigma):
    d = np.arange(kernel_radius(sigma) + 1, dtype=np.float64)
    return np.exp(-d * d / (2.0 * sigma * sigma))


def smooth_with_trace(g, f, sigma):
    """Smoothed ``f`` and the smoother diagonal for bandwidth ``sigma``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (g.node_count,):
        raise DimensionError(f"expected {g.node_count} values, got {f.shape}")
    return _kernels.smooth(g.indptr, g.indices, f, _kernel_values(sigma))


def kernel_smooth(g, f, sigma):
    """Nadaraya-Watson average of ``f`` with a Gaussian kernel on hop distance."""
    return smooth_with_trace(g, f, sigma)[0]


def gcv_score(f, smoothed, diag):
    m = len(f)
    den = (1.0 - diag.sum() / m) ** 2
    num = np.mean((f - smoothed) ** 2)
    return num / den if den > 0 else np.inf


def gcv_bandwidth(g, f, grid=DEFAULT_SIGMA_GRID):
    """Pick the bandwidth on ``grid`` minimising generalised cross validation.

    Returns ``(sigma, scores)`` with scores aligned to ``grid``; ties go to
    the smaller sigma.
    """
    grid = [float(s) for s in grid]
    if not grid:
        raise ValueError("sigma grid is empty")
    f = np.asarray(f, dtype=np.float64)
    scores = []
    for s in grid:
        sm, diag = smooth_with_trace(g, f, s)
        scores.append(gcv_score(f, sm, diag))
    scores = np.asarray(scores)
    if not np.any(np.isfinite(scores)):
        raise DegenerateGridError("every bandwidth on the grid gives an identity smoother", grid=grid)
    # scores within round-off of the best (e.g. a constant field) count as ties
    tie = GCV_TIE_RTOL * max(float(np.mean(f * f)), np.finfo(float).tiny)
    best = np.min(scores)
    return min(s for s, v in zip(grid, scores) if v <= best + tie), scores


def make_weights(f_smoothed, quantile_level=None, bandwidth=None, threshold=None):
    f = np.asarray(f_smoothed, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("smoothed frequencies must be nonnegative")
    if not f.sum() > 0:
        raise EmptyWeightsError("no exceedances anywhere; lower the quantile threshold")
    return WeightVector.normalized(f, quantile_level=quantile_level, bandwidth=bandwidth, threshold=threshold)


def estimate_weights(g, train, upper_fraction=0.005, grid=DEFAULT_SIGMA_GRID):
    """Full chain: pooled threshold, exceedance frequency, GCV smoothing, normalisation.

    Returns ``(weights, frequency, scores)``.
    """
    q = pooled_quantile(train, upper_fraction)
    f = exceedance_frequency(train, q)
    if not f.any():
        raise EmptyWeightsError("no exceedances anywhere; lower the quantile threshold", threshold=q)
    sigma, scores = gcv_bandwidth(g, f, grid)
    w = make_weights(kernel_smooth(g, f, sigma), upper_fraction, sigma, q)
    return w, f, scores
