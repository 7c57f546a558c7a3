import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from conftest import random_connected_graph
from oracles import dense_risk, fd_gradient, random_spd, random_weights
from wgmrf.basis import (
    Basis,
    DeflatedObjective,
    SolverOptions,
    compute_basis,
    gradient,
    hessian_vector,
    minimize_lbfgs,
    risk,
    solve_next_vector,
    starting_point,
)
from wgmrf.errors import BasisError, DimensionError, LineSearchError
from wgmrf.evaluation import cumulative_weighted_risk, risk_curve
from wgmrf.mesh import MeshGraph
from wgmrf.sparse_la import DenseCovariance
from wgmrf.synthetic import gmrf_setup
from wgmrf.weights import WeightVector


def gmrf_instance(rng, m, eps=1e-2):
    g = random_connected_graph(rng, m, m)
    _, _, cov = gmrf_setup(g, eps)
    return cov, cov.todense()


def orthonormal(rng, m, p):
    return np.linalg.qr(rng.standard_normal((m, p)))[0]


def test_risk_at_zero():
    obj = DeflatedObjective(DenseCovariance(np.eye(3)), np.full(3, 1 / 3))
    assert risk(obj, np.zeros(3)) == 0.0
    assert_allclose(risk(obj, np.zeros(3), include_constant=True), 1.0)


def test_risk_equal_weights_top_eigenvector(rng):
    S = random_spd(rng, 12)
    lam, V = np.linalg.eigh(S)
    obj = DeflatedObjective(DenseCovariance(S), np.full(12, 1 / 12))
    assert_allclose(risk(obj, V[:, -1], True), (np.trace(S) - lam[-1]) / 12, rtol=1e-12)


@pytest.mark.parametrize("p", [0, 3])
def test_risk_matches_dense_trace(rng, p):
    cov, S = gmrf_instance(rng, 20)
    w = random_weights(rng, 20)
    B = orthonormal(rng, 20, p + 1)
    prev, b = B[:, :p], B[:, p]
    obj = DeflatedObjective(cov, w, prev)
    assert_allclose(risk(obj, b, True), dense_risk(S, w, B), rtol=1e-10)
    # non-unit b: the algebraic form still holds
    P = np.eye(20) - prev @ prev.T
    Sp = P @ S @ P
    c = 3.0 * b + 0.1
    W = np.diag(w)
    expected = np.trace(W @ Sp) - 2 * c @ W @ Sp @ c + (c @ W @ c) * (c @ Sp @ c)
    assert_allclose(risk(obj, c, True), expected, rtol=1e-10)


def test_risk_even(rng):
    cov, _ = gmrf_instance(rng, 15)
    obj = DeflatedObjective(cov, random_weights(rng, 15), orthonormal(rng, 15, 2))
    b = rng.standard_normal(15)
    assert risk(obj, b) == risk(obj, -b)


def test_gradient_examples():
    obj = DeflatedObjective(DenseCovariance(np.eye(2)), np.array([0.5, 0.5]))
    assert_allclose(gradient(obj, np.zeros(2)), 0.0)
    assert_allclose(gradient(obj, np.array([1.0, 0.0])), [0.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("p", [0, 2])
def test_gradient_and_hessian_vs_finite_differences(rng, p):
    for _ in range(5):
        m = int(rng.integers(5, 40))
        cov, _ = gmrf_instance(rng, m)
        obj = DeflatedObjective(cov, random_weights(rng, m), orthonormal(rng, m, p))
        b = rng.standard_normal(m) / np.sqrt(m)
        h = 1e-5 * (1 + np.linalg.norm(b))
        g = gradient(obj, b)
        fd = fd_gradient(lambda x: risk(obj, x), b, h)
        assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(fd)
        v = rng.standard_normal(m)
        hv = hessian_vector(obj, b, v)
        e = 1e-5 / np.linalg.norm(v)
        fd_h = (gradient(obj, b + e * v) - gradient(obj, b - e * v)) / (2 * e)
        assert np.linalg.norm(hv - fd_h) <= 1e-5 * np.linalg.norm(fd_h)


def test_hessian_examples(rng):
    S = random_spd(rng, 6)
    w = random_weights(rng, 6)
    obj = DeflatedObjective(DenseCovariance(S), w)
    v = rng.standard_normal(6)
    W = np.diag(w)
    assert_allclose(hessian_vector(obj, np.zeros(6), v), -2 * (W @ S + S @ W) @ v, rtol=1e-12)
    assert_allclose(hessian_vector(obj, rng.standard_normal(6), np.zeros(6)), 0.0)


def test_starting_point_equal_weights(rng):
    cov, S = gmrf_instance(rng, 40)
    obj = DeflatedObjective(cov, np.full(40, 1 / 40))
    b0, lam = starting_point(obj, scale=1e-3)
    ev, V = np.linalg.eigh(S)
    assert_allclose(np.linalg.norm(b0), 1e-3, rtol=1e-12)
    assert abs(b0 @ V[:, -1]) / 1e-3 >= 1 - 1e-8
    assert_allclose(lam, 2 * ev[-1] / 40, rtol=1e-8)


def test_starting_point_single_weight_matches_dense(rng):
    cov, S = gmrf_instance(rng, 30)
    w = np.zeros(30)
    w[7] = 1.0
    obj = DeflatedObjective(cov, w)
    b0, _ = starting_point(obj, scale=1.0)
    W = np.diag(w)
    ev, V = np.linalg.eigh(W @ S + S @ W)
    assert abs(b0 @ V[:, -1]) >= 1 - 1e-8


def test_starting_point_respects_deflation(rng):
    cov, _ = gmrf_instance(rng, 25)
    B = orthonormal(rng, 25, 3)
    b0, _ = starting_point(DeflatedObjective(cov, random_weights(rng, 25), B))
    assert np.abs(B.T @ b0).max() <= 1e-12


def test_next_vector_equal_weights_is_top_eigenvector(rng):
    cov, S = gmrf_instance(rng, 60)
    obj = DeflatedObjective(cov, np.full(60, 1 / 60))
    b, d = solve_next_vector(obj)
    ev, V = np.linalg.eigh(S)
    assert abs(b @ V[:, -1]) >= 1 - 1e-6
    assert_allclose(d.risk, (np.trace(S) - ev[-1]) / 60, rtol=1e-8)
    assert b[np.argmax(np.abs(b))] > 0


def test_next_vector_identity_covariance(rng):
    w = random_weights(rng, 8)
    b, d = solve_next_vector(DeflatedObjective(DenseCovariance(np.eye(8)), w))
    assert_allclose(risk(DeflatedObjective(DenseCovariance(np.eye(8)), w), b), -w.max(), atol=1e-8)
    assert np.argmax(np.abs(b)) == np.argmax(w)


def test_no_polish_path_still_unit(rng):
    S = random_spd(rng, 6)
    b, d = solve_next_vector(DeflatedObjective(DenseCovariance(S), random_weights(rng, 6)),
                             SolverOptions(polish=False))
    assert_allclose(np.linalg.norm(b), 1.0)
    assert d.polish_iterations == 0


def test_compute_basis_equal_weights_matches_eigenvectors():
    _, _, cov = gmrf_setup(MeshGraph.lattice(6, 5), 1e-2)
    S = cov.todense()
    ev, V = np.linalg.eigh(S)
    ev, V = ev[::-1], V[:, ::-1]
    basis = compute_basis(cov, WeightVector.equal(30), 5)
    for k in range(5):
        cluster = np.abs(ev - ev[k]) <= 1e-6 * ev[0]
        assert np.linalg.norm(V[:, cluster].T @ basis.vectors[:, k]) >= 1 - 1e-6
    assert_allclose(basis.vectors.T @ basis.vectors, np.eye(5), atol=1e-8)
    assert len(basis.diagnostics) == 5


def test_full_basis_reaches_zero_risk(rng):
    S = random_spd(rng, 10)
    basis = compute_basis(DenseCovariance(S), WeightVector.equal(10), 10)
    assert_allclose(basis.vectors.T @ basis.vectors, np.eye(10), atol=1e-8)
    assert abs(cumulative_weighted_risk(DenseCovariance(S), np.full(10, 0.1), basis)) <= 1e-8


def test_weighted_lattice_invariants(rng):
    _, _, cov = gmrf_setup(MeshGraph.lattice(6, 5), 1e-4)
    w = WeightVector.normalized(rng.random(30) ** 4)
    basis = compute_basis(cov, w, 10)
    B = basis.vectors
    assert_allclose(B.T @ B, np.eye(10), atol=1e-8)
    assert np.all(B[np.abs(B).argmax(axis=0), np.arange(10)] > 0)
    r = risk_curve(cov, w, basis)
    assert np.all(np.diff(r) < 0)
    diag_risk = [d.risk for d in basis.diagnostics]
    assert_allclose(diag_risk, r[1:], rtol=1e-9)
    assert basis.weights_fingerprint == w.fingerprint()


def test_weighted_beats_eigenbasis(rng):
    _, _, cov = gmrf_setup(MeshGraph.lattice(6, 6), 1e-4)
    w = WeightVector.normalized(np.exp(-((MeshGraph.lattice(6, 6).coords[:, :2] - 1) ** 2).sum(axis=1)))
    wb = compute_basis(cov, w, 6)
    eb = compute_basis(cov, WeightVector.equal(36), 6)
    rw = risk_curve(cov, w, wb)
    re = risk_curve(cov, w, eb)
    assert np.all(rw <= re + 1e-8)


def test_resume_is_idempotent(rng):
    _, _, cov = gmrf_setup(MeshGraph.lattice(5, 5), 1e-3)
    w = WeightVector.normalized(rng.random(25))
    full = compute_basis(cov, w, 6)
    part = compute_basis(cov, w, 3)
    resumed = compute_basis(cov, w, 6, initial=part)
    assert_allclose(resumed.vectors, full.vectors, rtol=0, atol=0)
    assert compute_basis(cov, w, 3, initial=part).vectors is not None


def test_compute_basis_validation(rng):
    cov = DenseCovariance(random_spd(rng, 4))
    with pytest.raises(DimensionError):
        compute_basis(cov, WeightVector.equal(4), 5)
    with pytest.raises(DimensionError):
        compute_basis(cov, WeightVector.equal(3), 2)
    assert compute_basis(cov, WeightVector.equal(4), 0).p == 0


def test_failure_returns_partial_basis(rng, monkeypatch):
    from wgmrf.basis import solver

    cov = DenseCovariance(random_spd(rng, 6))
    real = solver.solve_next_vector
    calls = []

    def flaky(obj, opts):
        calls.append(obj.p)
        if obj.p == 2:
            raise LineSearchError("synthetic failure")
        return real(obj, opts)

    monkeypatch.setattr(solver, "solve_next_vector", flaky)
    with pytest.raises(BasisError) as exc:
        compute_basis(cov, WeightVector.equal(6), 4)
    assert exc.value.partial.p == 2
    assert exc.value.details["index"] == 2


def test_lbfgs_rosenbrock():
    def fg(x):
        a, b = x
        f = (1 - a) ** 2 + 100 * (b - a * a) ** 2
        g = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
        return f, g

    res = minimize_lbfgs(fg, np.array([-1.2, 1.0]), grad_tol=1e-10, max_iter=500)
    assert res.converged
    assert_allclose(res.x, [1.0, 1.0], atol=1e-7)


def test_lbfgs_quadratic_matches_solve(rng):
    A = random_spd(rng, 20)
    c = rng.standard_normal(20)
    res = minimize_lbfgs(lambda x: (0.5 * x @ A @ x - c @ x, A @ x - c), np.zeros(20), grad_tol=1e-12)
    assert_allclose(res.x, np.linalg.solve(A, c), rtol=1e-8)


def test_basis_head():
    b = Basis(np.eye(4)[:, :3], [], "x")
    assert b.head(2).p == 2 and b.head(2).weights_fingerprint == "x"


@pytest.mark.parametrize("p", [0, 3])
def test_curvature_preconditioner_inverts_model_hessian(rng, p):
    from wgmrf.basis.precond import curvature_preconditioner

    cov, S = gmrf_instance(rng, 40)
    w = random_weights(rng, 40)
    w[:10] = 0.0  # clamped regions make W singular
    B = orthonormal(rng, 40, p)
    obj = DeflatedObjective(cov, w, B)
    u = obj.project(rng.standard_normal(40))
    u /= np.linalg.norm(u)
    M = curvature_preconditioner(obj, u)
    P = np.eye(40) - B @ B.T
    t, s = u @ (w * u), u @ P @ S @ P @ u
    v = P @ rng.standard_normal(40)
    # exact inverse of t S + s W, followed by projection
    assert_allclose(M(v), P @ np.linalg.solve(t * S + s * np.diag(w), v), rtol=1e-9, atol=1e-12)
    dense = DeflatedObjective(DenseCovariance(S), w, B)
    assert_allclose(curvature_preconditioner(dense, u)(v), M(v), rtol=1e-6, atol=1e-9)


def test_restarts_escape_local_minimum():
    # on this instance the eigen start for the fourth vector polishes into a
    # local minimum; random restarts find the lower basin
    from wgmrf.synthetic import simulation_weights

    g = MeshGraph.lattice(30, 30)
    _, _, cov = gmrf_setup(g)
    w = simulation_weights(g, cov, 3, 100, 0)
    B = compute_basis(cov, w, 3)
    obj = DeflatedObjective(cov, w, B.vectors)
    _, plain = solve_next_vector(obj, SolverOptions(restarts=0))
    _, multi = solve_next_vector(obj, SolverOptions(restarts=2))
    assert multi.risk <= plain.risk
    assert multi.polish_start > 0
    assert plain.risk - multi.risk > 1e-3


def test_restarts_skipped_for_equal_weights(rng):
    cov, _ = gmrf_instance(rng, 30)
    _, d = solve_next_vector(DeflatedObjective(cov, WeightVector.equal(30)), SolverOptions(restarts=5))
    assert d.polish_start == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 12), st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_basis_invariants_property(m, p, seed):
    r = np.random.default_rng(seed)
    S = random_spd(r, m)
    w = random_weights(r, m)
    B = compute_basis(DenseCovariance(S), w, min(p, m))
    assert_allclose(B.vectors.T @ B.vectors, np.eye(B.p), atol=1e-10)
    curve = risk_curve(DenseCovariance(S), w, B)
    assert np.all(np.diff(curve) <= 1e-12 * curve[0])
    assert_allclose(curve[-1], dense_risk(S, w, B.vectors), rtol=1e-9, atol=1e-14)
