"""Compression and prediction error metrics."""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, UndefinedCorrelationError, WgmrfError


@dataclass(frozen=True, eq=False)
class ErrorReport:
    """Per-node mean squared error over the samples exceeding ``threshold``.

    ``per_node`` is NaN at nodes without a single exceedance.
    """

    per_node: np.ndarray
    exceedance_counts: np.ndarray
    threshold: float
    sample_set: str = ""

    @property
    def aggregate(self):
        defined = self.per_node[self.exceedance_counts > 0]
        return float(defined.mean()) if defined.size else float("nan")

    @property
    def defined(self):
        return self.exceedance_counts > 0

    def zero_filled(self):
        return np.where(self.defined, self.per_node, 0.0)


def _values(s):
    return np.asarray(getattr(s, "values", s), dtype=np.float64)


def exceedance_mse(observed, approx, q, sample_set=""):
    y = _values(observed)
    yh = _values(approx)
    if y.shape != yh.shape:
        raise DimensionError(f"shape mismatch {y.shape} vs {yh.shape}")
    mask = y > q
    counts = mask.sum(axis=0)
    sq = np.where(mask, (y - yh) ** 2, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_node = np.where(counts > 0, sq / np.maximum(counts, 1), np.nan)
    return ErrorReport(per_node, counts, float(q), sample_set)


def reconstruct(values, vectors, mean):
    """``mean + B B^T (y - mean)`` row by row."""
    c = values - mean
    return mean + (c @ vectors) @ vectors.T


def compression_error(samples, basis, q, mean):
    """Exceedance-restricted compression error of ``basis`` on uncentred ``samples``."""
    B = np.asarray(getattr(basis, "vectors", basis), dtype=np.float64)
    y = _values(samples)
    mean = np.asarray(mean, dtype=np.float64)
    if B.shape[0] != y.shape[1] or mean.shape != (y.shape[1],):
        raise DimensionError("basis, mean and samples disagree on node count")
    return exceedance_mse(y, reconstruct(y, B, mean), q, getattr(samples, "label", ""))


def theoretical_error_rate(cov, w, basis):
    """``tr(W P S P) / tr(W S)`` with ``P`` the projector off the basis span."""
    w = np.asarray(getattr(w, "values", w), dtype=np.float64)
    B = np.asarray(getattr(basis, "vectors", basis), dtype=np.float64).reshape(cov.dimension, -1)
    denom = cov.weighted_diag_sum(w)
    if not denom > 0:
        raise WgmrfError("tr(W Sigma) is not positive")
    num = denom
    if B.shape[1]:
        SB = cov.apply(B)
        WB = w[:, None] * B
        num += -2.0 * np.sum(SB * WB) + np.sum((B.T @ WB) * (B.T @ SB))
    return float(num / denom)


def contained_information(cov, w, basis):
    return 1.0 - theoretical_error_rate(cov, w, basis)


def cumulative_weighted_risk(cov, w, basis):
    """``tr(W P S P)``, the numerator of the error rate."""
    w = np.asarray(getattr(w, "values", w), dtype=np.float64)
    return theoretical_error_rate(cov, w, basis) * cov.weighted_diag_sum(w)


def risk_curve(cov, w, basis):
    """Cumulative weighted risk for the leading 0, 1, ..., p columns."""
    w = np.asarray(getattr(w, "values", w), dtype=np.float64)
    B = np.asarray(getattr(basis, "vectors", basis), dtype=np.float64).reshape(cov.dimension, -1)
    base = cov.weighted_diag_sum(w)
    p = B.shape[1]
    if p == 0:
        return np.array([base])
    SB = cov.apply(B)
    WB = w[:, None] * B
    cross = np.einsum("ij,ij->j", SB, WB)
    G = (B.T @ WB) * (B.T @ SB)
    out = np.empty(p + 1)
    out[0] = base
    for k in range(1, p + 1):
        out[k] = base - 2.0 * cross[:k].sum() + G[:k, :k].sum()
    return out


def prediction_error(test_high, predicted, q):
    y, yp = _values(test_high), _values(predicted)
    if y.shape[0] != yp.shape[0]:
        raise DimensionError(f"{y.shape[0]} test samples but {yp.shape[0]} predictions")
    return exceedance_mse(y, yp, q, getattr(test_high, "label", ""))


def exceedance_scatter(test_high, predicted, q):
    """Observed/predicted pairs where the observation exceeds ``q``, and their Pearson r."""
    y, yp = _values(test_high), _values(predicted)
    if y.shape != yp.shape:
        raise DimensionError(f"shape mismatch {y.shape} vs {yp.shape}")
    mask = y > q
    pairs = np.column_stack([y[mask], yp[mask]])
    if len(pairs) < 2:
        raise UndefinedCorrelationError("fewer than two exceedance pairs", pairs=int(len(pairs)))
    sy, sp_ = pairs.std(axis=0)
    if sy == 0 or sp_ == 0:
        raise UndefinedCorrelationError("zero variance among exceedance pairs")
    r = float(np.corrcoef(pairs[:, 0], pairs[:, 1])[0, 1])
    return pairs, r
