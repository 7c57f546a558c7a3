"""Weighted orthonormal basis by eigenvector-seeded quasi-Newton descent."""
import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import BasisError, DegenerateDirectionError, DimensionError, LineSearchError, WgmrfError
from ..sparse_la.eigen import LARGEST, canonical_sign, extreme_eigenpair
from ..weights import WeightVector
from .lbfgs import minimize_lbfgs
from .objective import DeflatedObjective
from .precond import curvature_preconditioner

log = logging.getLogger(__name__)

PRECOND_REFRESH = 100


@dataclass(frozen=True)
class SolverOptions:
    start_scale: float = 1e-3
    grad_tol: float = 1e-8
    descent_tol: float = 1e-5
    max_iter: int = 1000
    memory: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    polish: bool = True
    precondition: bool = True
    restarts: int = 2
    eig_tol: float = 1e-8
    eig_max_iter: int = None
    seed: int = 0


@dataclass
class VectorDiagnostics:
    risk: float
    grad_norm: float
    iterations: int
    polish_iterations: int
    wall_time: float
    start_eigenvalue: float
    polish_start: int = 0


@dataclass
class Basis:
    """Orthonormal columns plus per-vector solver diagnostics."""

    vectors: np.ndarray
    diagnostics: list = field(default_factory=list)
    weights_fingerprint: str = ""

    @property
    def p(self):
        return self.vectors.shape[1]

    @property
    def m(self):
        return self.vectors.shape[0]

    def head(self, p):
        return replace(self, vectors=self.vectors[:, :p].copy(), diagnostics=self.diagnostics[:p])

    def diagnostics_dicts(self):
        return [asdict(d) for d in self.diagnostics]

    @classmethod
    def empty(cls, m, weights_fingerprint=""):
        return cls(np.zeros((m, 0)), [], weights_fingerprint)


def starting_point(obj, scale=1e-3, tol=1e-8, max_iter=None, seed=0):
    """``scale`` times the top unit eigenvector of ``P (W S_p + S_p W) P``.

    Returns ``(b_start, eigenvalue)``.
    """
    m = obj.dimension
    lam, v = extreme_eigenpair(
        obj.operator, m, LARGEST, tol=tol, max_iter=max_iter,
        seed=seed, project=obj.project,
    )
    return scale * v, lam


def _orthogonalize(b, B):
    for _ in range(2):
        for j in range(B.shape[1]):
            b = b - np.dot(B[:, j], b) * B[:, j]
    return b


def solve_next_vector(obj, opts=SolverOptions()):
    """Next basis vector for the deflated objective ``obj``.

    Runs L-BFGS on the unconstrained deflated risk from a small multiple of
    the leading direction of ``W S_p + S_p W`` and normalises.  With
    ``opts.polish`` the result is refined on the unit sphere inside the
    orthogonal complement of the previous columns, together with
    ``opts.restarts`` seeded random unit starts (skipped for equal weights);
    the lowest risk wins.
    Returns ``(b, diagnostics)``.
    """
    t0 = time.perf_counter()
    seed = _seed(opts.seed, obj.p)
    b0, lam = starting_point(obj, opts.start_scale, opts.eig_tol, opts.eig_max_iter, seed=seed)
    # with polishing the descent only has to land in a reasonable basin
    tol = opts.descent_tol if opts.polish else opts.grad_tol
    res = minimize_lbfgs(obj.risk_and_gradient, b0, tol, opts.max_iter, opts.memory, opts.c1, opts.c2)
    b = _unit(_orthogonalize(res.x, obj.B))
    polish_it = 0
    grad_norm = res.grad_norm
    winner = 0
    if opts.polish:
        starts = [b]
        rng = np.random.default_rng([seed, 1])
        for _ in range(0 if obj.uniform_weights else opts.restarts):
            z = _orthogonalize(rng.standard_normal(obj.dimension), obj.B)
            starts.append(z / np.linalg.norm(z))
        best_f = np.inf
        for r, start in enumerate(starts):
            try:
                pol, its = _polish(obj, start, opts)
            except LineSearchError:
                if r == 0:
                    raise
                continue
            polish_it += its
            u = _unit(_orthogonalize(pol.x, obj.B))
            f = obj.risk(u)
            if not np.isfinite(best_f) or f < best_f - 1e-12 * abs(best_f):
                best_f, b, grad_norm, winner = f, u, pol.grad_norm, r
    b = canonical_sign(b)
    diag = VectorDiagnostics(
        risk=float(obj.risk(b, include_constant=True)),
        grad_norm=float(grad_norm),
        iterations=int(res.iterations),
        polish_iterations=int(polish_it),
        wall_time=time.perf_counter() - t0,
        start_eigenvalue=float(lam),
        polish_start=winner,
    )
    return b, diag


def _polish(obj, start, opts):
    """Sphere L-BFGS, refreshing the curvature preconditioner every ``PRECOND_REFRESH`` iterations."""
    x, total = start, 0
    while True:
        M = curvature_preconditioner(obj, _unit(obj.project(x))) if opts.precondition else None
        budget = opts.max_iter - total
        if M is not None:
            budget = min(budget, PRECOND_REFRESH)
        try:
            nxt = minimize_lbfgs(obj.sphere_risk_and_gradient, x, opts.grad_tol, budget, opts.memory,
                                 opts.c1, opts.c2, M)
        except LineSearchError:
            if total == 0:
                raise
            # a fresh start from a nearly stationary point: no further decrease available
            return pol, total
        pol = nxt
        total += pol.iterations
        x = pol.x
        if pol.converged or total >= opts.max_iter:
            return pol, total


def _unit(b):
    nb = np.linalg.norm(b)
    if nb < 1e-10:
        raise DegenerateDirectionError(
            "optimiser collapsed into the span of the previous basis vectors", norm=float(nb)
        )
    return b / nb


def _seed(seed, index):
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def compute_basis(cov, w, p, opts=SolverOptions(), initial=None, callback=None):
    """Greedy weighted basis of ``p`` vectors.

    ``initial`` (a :class:`Basis`) is extended rather than recomputed.  On a
    solver failure a :class:`BasisError` is raised whose ``partial``
    attribute holds the vectors finished so far.
    """
    if not isinstance(w, WeightVector):
        w = WeightVector(np.asarray(w, dtype=np.float64))
    m = cov.dimension
    if len(w) != m:
        raise DimensionError(f"weights have length {len(w)}, covariance dimension {m}")
    if p > m:
        raise DimensionError(f"cannot build {p} orthonormal vectors in dimension {m}")
    fp = w.fingerprint()
    basis = Basis.empty(m, fp) if initial is None else replace(initial, weights_fingerprint=fp)
    if basis.m != m:
        raise DimensionError("initial basis has the wrong dimension")
    cols = [basis.vectors[:, j] for j in range(basis.p)]
    diags = list(basis.diagnostics)
    constant = cov.weighted_diag_sum(w.values)
    for k in range(basis.p, p):
        B = np.column_stack(cols) if cols else np.zeros((m, 0))
        obj = DeflatedObjective(cov, w, B, base_trace=constant)
        try:
            b, d = solve_next_vector(obj, opts)
        except WgmrfError as exc:
            err = BasisError(f"vector {k + 1} failed: {exc}", index=k, cause=exc.code)
            err.partial = Basis(B.copy(), diags, fp)
            raise err from exc
        cols.append(b)
        diags.append(d)
        log.debug("vector %d: risk %.6g, %d+%d iterations, %.3fs", k + 1, d.risk, d.iterations,
                  d.polish_iterations, d.wall_time)
        if callback is not None:
            callback(k, b, d)
    vectors = np.column_stack(cols) if cols else np.zeros((m, 0))
    return Basis(vectors, diags, fp)
