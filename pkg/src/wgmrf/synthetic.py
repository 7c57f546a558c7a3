"""Synthetic GMRF data: samples, simulation-study weights, coupled fidelity pairs.

Random streams
--------------
Every draw comes from a Philox generator keyed by
``SeedSequence(seed, spawn_key=(stream, chunk))``.  Stream ids are fixed
below; ``chunk`` counts blocks of :data:`CHUNK` samples, so any block can be
regenerated independently and outputs do not depend on evaluation order.
"""
import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ConfigError, EmptyWeightsError
from .mesh import MeshGraph, build_precision
from .samples import FieldSamples
from .sparse_la import GmrfCovariance, factorize
from .weights import WeightVector

CHUNK = 1024

STREAM_GMRF = 1
STREAM_WEIGHT_CENTERS = 2
STREAM_LATENT = 3
STREAM_LOADINGS = 4
STREAM_NOISE_HIGH = 5
STREAM_NOISE_LOW = 6

WEIGHT_CENTER_PRESETS = (1, 3, 9, 15)
WEIGHT_BASIS_PRESETS = (100, 1000)


def rng(seed, stream, chunk=0):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(chunk)))
    return np.random.Generator(np.random.Philox(ss))


def standard_normal(seed, stream, n, m):
    """(n, m) standard normals assembled chunk by chunk."""
    out = np.empty((n, m))
    for c, start in enumerate(range(0, n, CHUNK)):
        stop = min(n, start + CHUNK)
        out[start:stop] = rng(seed, stream, c).standard_normal((stop - start, m))
    return out


def sample_gmrf(factor, n, seed, stream=STREAM_GMRF, ids=None, label="synthetic"):
    """``n`` draws from N(0, Q^{-1}) using the Cholesky factor of ``Q``."""
    if n < 1:
        raise ValueError("n must be positive")
    m = factor.dimension
    z = standard_normal(seed, stream, n, m)
    y = factor.solve_lt(z.T).T
    return FieldSamples(np.ascontiguousarray(y), ids if ids is not None else (), label=label)


def simulation_weights(g, cov, centers, basis_len, seed, eigvecs=None, max_retries=10):
    """Random smooth weights: indicator of ``centers`` random nodes, projected
    onto the leading ``basis_len`` covariance eigenvectors, clamped at zero and
    normalised."""
    from .multifidelity import eigen_basis

    m = g.node_count
    if not 1 <= centers <= m:
        raise ValueError(f"centers must lie in [1, {m}]")
    if basis_len > m:
        raise ValueError(f"basis_len {basis_len} exceeds node count {m}")
    V = eigvecs if eigvecs is not None else eigen_basis(cov, basis_len, seed=seed).vectors
    V = V[:, :basis_len]
    for attempt in range(max_retries + 1):
        picks = rng(seed, STREAM_WEIGHT_CENTERS, attempt).choice(m, size=centers, replace=False)
        ind = np.zeros(m)
        ind[picks] = 1.0
        proj = V @ (V.T @ ind)
        proj = np.clip(proj, 0.0, None)
        if proj.sum() > 0:
            return WeightVector.normalized(proj)
    raise EmptyWeightsError(f"projection non-positive for {max_retries + 1} seeds")


@dataclass(frozen=True)
class SyntheticSpec:
    """Desk-scale stand-in for a paired low/high fidelity simulation study."""

    high_dims: tuple = (30, 30)
    coarsen: int = 3
    epsilon: float = 1e-4
    n_train: int = 50
    n_test: int = 850
    seed: int = 0
    latent_count: int = 8
    noise_scale: float = 0.1
    hotspots: int = 2
    hotspot_spread: float = 3.0
    loading_width: float = 2.0
    weight_centers: int = 3
    weight_basis_len: int = 100

    def __post_init__(self):
        object.__setattr__(self, "high_dims", tuple(int(d) for d in self.high_dims))
        if len(self.high_dims) != 2 or min(self.high_dims) < 2:
            raise ConfigError("high_dims must be two lattice sizes >= 2")
        if self.coarsen < 1 or any(d % self.coarsen for d in self.high_dims):
            raise ConfigError(
                f"coarsening factor {self.coarsen} does not divide lattice dims {self.high_dims}",
                coarsen=self.coarsen,
            )
        if min(self.low_dims) < 2:
            raise ConfigError("coarsened lattice has fewer than 2 nodes per side")
        if self.latent_count < 0 or self.n_train < 1 or self.n_test < 0:
            raise ConfigError("invalid sample or latent counts")

    @property
    def low_dims(self):
        return tuple(d // self.coarsen for d in self.high_dims)

    def low_to_high(self):
        """High-mesh node index of every low-mesh node."""
        nx, ny = self.high_dims
        lx, ly = self.low_dims
        a, b = np.divmod(np.arange(lx * ly), ly)
        return (a * self.coarsen) * ny + b * self.coarsen

    def to_dict(self):
        d = asdict(self)
        d["high_dims"] = list(self.high_dims)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synthetic spec keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def loading_fields(spec, coords):
    """Smooth localised loadings: Gaussian bumps clustered around hotspots."""
    r = rng(spec.seed, STREAM_LOADINGS)
    nx, ny = spec.high_dims
    hot = r.uniform([0, 0], [nx - 1, ny - 1], size=(max(spec.hotspots, 1), 2))
    A = np.empty((len(coords), spec.latent_count))
    for j in range(spec.latent_count):
        c = hot[j % len(hot)] + r.normal(scale=spec.hotspot_spread, size=2)
        amp = r.uniform(0.5, 1.5)
        d2 = ((coords[:, :2] - c) ** 2).sum(axis=1)
        A[:, j] = amp * np.exp(-d2 / (2.0 * spec.loading_width ** 2))
    return A


def coupled_fidelity(spec):
    """Paired low/high fidelity train and test sets.

    ``high = A_h z + noise * GMRF``, ``low = A_l z + noise * GMRF_low`` with
    ``A_l`` the loadings read off at the coarse nodes.  Returns a dict with
    keys ``train_low``, ``train_high``, ``test_low``, ``test_high`` and the
    meshes ``high_mesh``, ``low_mesh``.
    """
    high_mesh = MeshGraph.lattice(*spec.high_dims)
    low_mesh = MeshGraph.lattice(*spec.low_dims)
    n = spec.n_train + spec.n_test
    ids = [f"train-{i:05d}" for i in range(spec.n_train)] + [f"test-{i:05d}" for i in range(spec.n_test)]
    A_h = loading_fields(spec, high_mesh.coords)
    A_l = A_h[spec.low_to_high()]
    z = standard_normal(spec.seed, STREAM_LATENT, n, spec.latent_count)
    high = z @ A_h.T
    low = z @ A_l.T
    if spec.noise_scale > 0:
        fh = factorize(build_precision(high_mesh, spec.epsilon))
        fl = factorize(build_precision(low_mesh, spec.epsilon))
        high = high + spec.noise_scale * sample_gmrf(fh, n, spec.seed, STREAM_NOISE_HIGH).values
        low = low + spec.noise_scale * sample_gmrf(fl, n, spec.seed, STREAM_NOISE_LOW).values
    tr = slice(0, spec.n_train)
    te = slice(spec.n_train, n)
    return {
        "high_mesh": high_mesh,
        "low_mesh": low_mesh,
        "train_low": FieldSamples(low[tr], ids[tr], label="synthetic-train-low"),
        "train_high": FieldSamples(high[tr], ids[tr], label="synthetic-train-high"),
        "test_low": FieldSamples(low[te], ids[te], label="synthetic-test-low"),
        "test_high": FieldSamples(high[te], ids[te], label="synthetic-test-high"),
    }


def gmrf_setup(g, epsilon=1e-4):
    """Precision, factor and covariance operator for mesh ``g``."""
    q = build_precision(g, epsilon)
    f = factorize(q)
    return q, f, GmrfCovariance(f)
