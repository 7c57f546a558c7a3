"""Sample matrices of simulated fields."""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import AlignmentError, DimensionError


@dataclass(frozen=True, eq=False)
class FieldSamples:
    """``n`` field realisations on ``m`` nodes, one per row.

    ``mean`` is set only on centred copies and records what was subtracted.
    """

    values: np.ndarray
    sample_ids: tuple = ()
    mean: Optional[np.ndarray] = field(default=None, repr=False)
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2:
            raise DimensionError("sample values must be a 2-d (n, m) array")
        if not np.all(np.isfinite(v)):
            raise ValueError("sample values must be finite")
        object.__setattr__(self, "values", v)
        ids = tuple(str(s) for s in self.sample_ids) if len(self.sample_ids) else tuple(
            str(i) for i in range(v.shape[0])
        )
        if len(ids) != v.shape[0]:
            raise DimensionError(f"{len(ids)} sample ids for {v.shape[0]} samples")
        object.__setattr__(self, "sample_ids", ids)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def m(self):
        return self.values.shape[1]

    def column_mean(self):
        return self.values.mean(axis=0)

    def centered(self, mean=None):
        mu = self.column_mean() if mean is None else np.asarray(mean, dtype=np.float64)
        return replace(self, values=self.values - mu, mean=mu)

    def uncentered(self):
        if self.mean is None:
            return self
        return replace(self, values=self.values + self.mean, mean=None)

    def take(self, ids):
        """Rows reordered to match ``ids``; unknown ids raise AlignmentError."""
        pos = {s: i for i, s in enumerate(self.sample_ids)}
        missing = [s for s in ids if s not in pos]
        if missing:
            raise AlignmentError(f"{len(missing)} sample ids not found in {self.label!r}", missing=missing[:10])
        rows = [pos[s] for s in ids]
        return replace(self, values=self.values[rows], sample_ids=tuple(ids))
