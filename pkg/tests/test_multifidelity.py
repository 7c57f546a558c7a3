import numpy as np
import pytest
from numpy.testing import assert_allclose

from wgmrf.basis import Basis, compute_basis
from wgmrf.errors import AlignmentError, DimensionError, InsufficientDataError
from wgmrf.mesh import MeshGraph, SparseSpdMatrix
from wgmrf.multifidelity import (
    RIDGE_GRID,
    decode,
    eigen_basis,
    encode,
    fit_pipeline,
    predict,
    ridge_gcv,
)
from wgmrf.samples import FieldSamples
from wgmrf.sparse_la import DenseCovariance, GmrfCovariance, factorize
from wgmrf.synthetic import SyntheticSpec, coupled_fidelity, gmrf_setup
from wgmrf.weights import WeightVector


def ortho(rng, m, p):
    return np.linalg.qr(rng.standard_normal((m, p)))[0]


def test_eigen_basis_diagonal_precision():
    cov = GmrfCovariance(factorize(SparseSpdMatrix.from_dense(np.diag([1.0, 2.0, 3.0]))))
    B = eigen_basis(cov, 3).vectors
    assert_allclose(B, np.eye(3), atol=1e-10)


def test_eigen_basis_full_set(rng):
    B = eigen_basis(DenseCovariance(np.cov(rng.standard_normal((40, 12)), rowvar=False)), 12).vectors
    assert_allclose(B.T @ B, np.eye(12), atol=1e-10)


def test_eigen_basis_agrees_with_equal_weight_solver():
    _, _, cov = gmrf_setup(MeshGraph.lattice(10, 10), 1e-4)
    # lattice spectra are degenerate; compare spanned subspaces cluster by cluster
    lam = np.linalg.eigvalsh(cov.todense())[::-1]
    e = eigen_basis(cov, 5).vectors
    c = compute_basis(cov, WeightVector.equal(100), 5).vectors
    k = 0
    while k < 5:
        j = k
        while j + 1 < 5 and abs(lam[j + 1] - lam[k]) <= 1e-6 * lam[0]:
            j += 1
        s = np.linalg.svd(e[:, k:j + 1].T @ c[:, k:j + 1], compute_uv=False)
        assert s.min() >= 1 - 1e-6
        k = j + 1


def test_encode_decode_identities(rng):
    B = ortho(rng, 10, 3)
    mean = rng.standard_normal(10)
    assert_allclose(encode(mean[None, :], B, mean), 0.0)
    assert_allclose(encode((mean + B[:, 0])[None, :], B, mean), [[1, 0, 0]], atol=1e-14)
    y = rng.standard_normal((7, 10))
    u = encode(y, B, mean)
    rt = decode(u, B, mean).values
    assert_allclose(encode(rt, B, mean), u, atol=1e-10)
    assert_allclose(rt, mean + (y - mean) @ B @ B.T, atol=1e-10)
    assert_allclose(decode(np.zeros((1, 3)), B, mean).values[0], mean)
    assert_allclose(decode([[0, 1, 0]], B, mean).values[0], mean + B[:, 1], atol=1e-14)


def test_encode_decode_dimension_errors(rng):
    B = ortho(rng, 6, 2)
    with pytest.raises(DimensionError):
        encode(rng.random((3, 5)), B, np.zeros(6))
    with pytest.raises(DimensionError):
        decode(rng.random((3, 3)), B, np.zeros(6))


def paired(rng, n, m, ids=None):
    x = rng.standard_normal((n, m))
    ids = ids or [f"s{i}" for i in range(n)]
    return FieldSamples(x, ids)


def test_identity_coupling(rng):
    B = Basis(ortho(rng, 12, 4))
    low = paired(rng, 30, 12)
    model = fit_pipeline(low, low, B, B, ridge_penalty=0.0)
    assert_allclose(model.coef, np.eye(4), atol=1e-8)
    assert_allclose(model.intercept, 0.0, atol=1e-8)
    # x in span + mean reproduces itself
    x = model.mean_x + rng.standard_normal((3, 4)) @ B.vectors.T
    assert_allclose(predict(model, FieldSamples(x)).values, x, atol=1e-8)


def test_zero_target(rng):
    B = Basis(ortho(rng, 12, 4))
    low = paired(rng, 30, 12)
    high = FieldSamples(np.tile(rng.standard_normal(12), (30, 1)), low.sample_ids)
    model = fit_pipeline(low, high, B, B, ridge_penalty=0.5)
    assert_allclose(model.coef, 0.0, atol=1e-12)
    assert_allclose(model.intercept, 0.0, atol=1e-12)


def test_predict_at_mean(rng):
    Bx, By = Basis(ortho(rng, 8, 3)), Basis(ortho(rng, 9, 2))
    low, high = paired(rng, 20, 8), paired(rng, 20, 9)
    model = fit_pipeline(low, high, Bx, By, ridge_penalty=0.1)
    out = predict(model, FieldSamples(model.mean_x[None, :])).values[0]
    assert_allclose(out, model.mean_y + By.vectors @ model.intercept, atol=1e-12)


def test_least_squares_residuals_orthogonal(rng):
    Bx, By = Basis(ortho(rng, 15, 4)), Basis(ortho(rng, 11, 3))
    low, high = paired(rng, 40, 15), paired(rng, 40, 11)
    model = fit_pipeline(low, high, Bx, By, ridge_penalty=0.0)
    ux = encode(low, Bx, model.mean_x)
    uy = encode(high, By, model.mean_y)
    resid = uy - (ux @ model.coef.T + model.intercept)
    design = np.column_stack([np.ones(40), ux])
    assert np.abs(design.T @ resid).max() <= 1e-8 * np.abs(design.T @ uy).max()


def test_constant_shift_invariance(rng):
    Bx, By = Basis(ortho(rng, 10, 3)), Basis(ortho(rng, 10, 3))
    low, high = paired(rng, 25, 10), paired(rng, 25, 10)
    shifted = FieldSamples(high.values + 4.2, high.sample_ids)
    test = FieldSamples(rng.standard_normal((5, 10)))
    a = predict(fit_pipeline(low, high, Bx, By), test).values
    b = predict(fit_pipeline(low, shifted, Bx, By), test).values
    assert_allclose(b - a, 4.2, atol=1e-10)


def test_alignment_by_sample_id(rng):
    Bx, By = Basis(ortho(rng, 6, 2)), Basis(ortho(rng, 7, 2))
    low, high = paired(rng, 10, 6), paired(rng, 10, 7)
    perm = rng.permutation(10)
    shuffled = FieldSamples(high.values[perm], [high.sample_ids[i] for i in perm])
    m1 = fit_pipeline(low, high, Bx, By, 0.1)
    m2 = fit_pipeline(low, shuffled, Bx, By, 0.1)
    assert_allclose(m1.coef, m2.coef, rtol=1e-12)
    other = FieldSamples(high.values, [f"x{i}" for i in range(10)])
    with pytest.raises(AlignmentError):
        fit_pipeline(low, other, Bx, By)


def test_insufficient_data(rng):
    B = Basis(ortho(rng, 5, 2))
    one = FieldSamples(rng.random((1, 5)), ["a"])
    with pytest.raises(InsufficientDataError):
        fit_pipeline(one, one, B, B)


def test_ridge_gcv_matches_brute_force(rng):
    n, px, py = 20, 6, 3
    X = rng.standard_normal((n, px))
    X -= X.mean(axis=0)
    Y = X @ rng.standard_normal((px, py)) + rng.standard_normal((n, py))
    Y -= Y.mean(axis=0)
    scores = ridge_gcv(X, Y, [0.01, 1.0, 10.0])
    for lam, score in scores.items():
        H = X @ np.linalg.solve(X.T @ X + lam * np.eye(px), X.T)
        rss = np.sum((Y - H @ Y) ** 2)
        dof = 1 + np.trace(H)
        assert_allclose(score, rss / n / (1 - dof / n) ** 2, rtol=1e-10)


@pytest.fixture(scope="module")
def synthetic():
    return coupled_fidelity(SyntheticSpec(high_dims=(18, 18), n_train=50, n_test=300, seed=5))


def test_gcv_ridge_beats_truncated_ols(synthetic):
    low_mesh = synthetic["low_mesh"]
    _, _, cov_l = gmrf_setup(low_mesh, 1e-4)
    _, _, cov_h = gmrf_setup(synthetic["high_mesh"], 1e-4)
    By = eigen_basis(cov_h, 10)
    Bx = eigen_basis(cov_l, low_mesh.node_count)
    tl, th = synthetic["train_low"], synthetic["train_high"]
    model = fit_pipeline(tl, th, Bx, By, "gcv")
    assert np.isfinite(model.ridge_penalty) and model.ridge_penalty in RIDGE_GRID
    ols = fit_pipeline(tl, th, Bx.head(tl.n - 2), By, 0.0)
    test_y = synthetic["test_high"].values

    def mse(m):
        return np.mean((predict(m, synthetic["test_low"]).values - test_y) ** 2)

    assert mse(model) < mse(ols)
