import warnings

import numpy as np
import pytest

from einsteindr import kernel as kr
from einsteindr import linear as lin
from einsteindr import oracle
from einsteindr.exceptions import DataFormatError, RankDeficiencyError
from einsteindr.graph import build_affinity, lle_weights
from einsteindr.spectral import subspace_distance

K3 = np.ones((3, 3)) - np.eye(3)


def _psd(rng, n):
    A = rng.standard_normal((n, n))
    return A @ A.T + 0.1 * np.eye(n)


# ---------------------------------------------------------------- gram


def test_gram_linear_orthonormal_slices():
    X = np.reshape(np.eye(6), (2, 3, 6), order="F")
    assert np.allclose(kr.gram(X, kr.KernelSpec("linear")).K, np.eye(6))


def test_gram_gaussian_diagonal(rng):
    K = kr.gram(rng.random((3, 3, 8))).K
    assert np.all(np.diag(K) == 1.0)
    assert np.array_equal(K, K.T)
    assert np.linalg.eigvalsh(K)[0] >= -1e-8


def test_gram_polynomial_degree_one(rng):
    X = rng.random((4, 9))
    a = kr.gram(X, kr.KernelSpec("polynomial", degree=1, offset=0.0)).K
    b = kr.gram(X, kr.KernelSpec("linear")).K
    assert np.allclose(a, b, atol=1e-14)


def test_gram_other_kinds(rng):
    X = rng.random((4, 6))
    for kind in ("laplacian", "sigmoid"):
        K = kr.gram(X, kr.KernelSpec(kind, sigma=1.0, slope=0.1)).K
        assert np.array_equal(K, K.T)


def test_kernel_spec_errors():
    with pytest.raises(ValueError):
        kr.KernelSpec("gaussian", sigma=0.0)
    with pytest.raises(ValueError):
        kr.KernelSpec("cubic")
    with pytest.raises(ValueError):
        kr.KernelSpec("polynomial", degree=0)


# ---------------------------------------------------------------- centering


def test_center_idempotent(rng):
    C = kr.center_gram(_psd(rng, 7))
    again = kr.center_gram(C)
    assert np.max(np.abs(again.K - C.K)) <= 1e-12
    assert np.array_equal(C.K, C.K.T)


def test_center_ones_vanishes():
    assert np.max(np.abs(kr.center_gram(np.ones((5, 5))).K)) <= 1e-15


def test_center_four_terms(rng):
    K = _psd(rng, 6)
    n = 6
    one = np.ones((n, n))
    ref = K - one @ K / n - K @ one / n + one @ K @ one / n**2
    got = kr.center_gram(K)
    assert np.max(np.abs(got.K - ref)) <= 1e-12
    assert got.centered
    assert np.max(np.abs(got.K.sum(0))) <= 1e-8 and np.max(np.abs(got.K.sum(1))) <= 1e-8


# ---------------------------------------------------------------- kPCA


def test_kpca_linear_matches_pca(rng):
    X = rng.standard_normal((5, 4, 20))
    Y = kr.fit_kpca(kr.gram(X, kr.KernelSpec("linear")), 4)
    Yp = lin.transform(lin.fit_pca(X, 4), X)
    assert subspace_distance(Y.T, (Yp - Yp.mean(1, keepdims=True)).T) <= 1e-8
    # sqrt scaling reproduces the PCA coordinates up to sign
    assert np.allclose(np.abs(Y), np.abs(Yp - Yp.mean(1, keepdims=True)), atol=1e-10)


def test_kpca_rank_one():
    x = np.array([[1.0, 2.0, 4.0, 7.0]])
    K = x.T @ x
    assert kr.fit_kpca(K, 1).shape == (1, 4)
    with pytest.raises(RankDeficiencyError):
        kr.fit_kpca(K, 2)


def test_kpca_wide_gaussian_limit(rng):
    X = rng.standard_normal((3, 15))
    X -= X.mean(axis=1, keepdims=True)
    lin_Y = kr.fit_kpca(kr.gram(X, kr.KernelSpec("linear")), 2)
    gau_Y = kr.fit_kpca(kr.gram(X, kr.KernelSpec("gaussian", sigma=1e6)), 2)
    assert subspace_distance(lin_Y.T, gau_Y.T) <= 1e-3


def test_kpca_scalings(rng):
    K = _psd(rng, 8)
    unit = kr.fit_kpca(K, 3, scaling="none")
    assert np.allclose(unit @ unit.T, np.eye(3), atol=1e-12)
    lam = np.linalg.eigvalsh(kr.center_gram(K).K)[::-1][:3]
    assert np.allclose(kr.fit_kpca(K, 3, scaling="inverse"), unit / np.sqrt(lam)[:, None])


# ---------------------------------------------------------------- kLPP


def test_klpp_matches_le_problem(rng):
    X = rng.standard_normal((4, 15))
    G = build_affinity(X, k=5)
    Z = kr.fit_klpp(kr.gram(X), G, 3, skip_first=True)
    ref = oracle.matrix_method("le", X, G.W, 3)
    assert subspace_distance(Z.T, ref.Y.T) <= 1e-8


def test_klpp_complete_graph():
    # L z = lambda D z with D = 2I: smallest pair is lambda 0, z = 1/sqrt(6)
    Z = kr.fit_klpp(np.eye(3), K3, 1)
    assert np.allclose(Z, 1 / np.sqrt(6))


def test_klpp_self_loops_flagged():
    with pytest.raises(RankDeficiencyError):
        kr.fit_klpp(np.eye(4), np.eye(4), 1)


def test_klpp_singular_gram_warns():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        kr.fit_klpp(np.ones((3, 3)), K3, 1)
    assert any("singular" in str(w.message) for w in rec)


# ---------------------------------------------------------------- kONPP


def test_konpp_zero_weights_is_kernel_spectrum(rng):
    K = _psd(rng, 6)
    a = kr.fit_konpp(K, np.zeros((6, 6)), 2)
    b = kr.fit_kolpp(K, 2)
    assert subspace_distance(a.T, b.T) <= 1e-8


def test_konpp_identity_kernel(rng):
    X = rng.standard_normal((3, 10))
    W = lle_weights(X, k=3).W
    _, sel = kr.fit_konpp(np.eye(10), W, 4, return_eig=True)
    M = lin.residual_matrix(W)
    assert np.allclose(sel.values, np.linalg.eigvalsh(M)[:4], atol=1e-12)


def test_konpp_symmetrized_residual(rng):
    X = rng.standard_normal((3, 12))
    K = kr.gram(X)
    W = lle_weights(X, k=4)
    S, A = kr.konpp_operator(K, W)
    _, sel = kr.fit_konpp(K, W, 3, return_eig=True)
    for lam, u in zip(sel.values, sel.vectors.T):
        assert np.linalg.norm(A @ u - lam * u) <= 1e-8
    # z = S u is an eigenvector of K M with the same eigenvalue
    KM = K.K @ lin.residual_matrix(W)
    for lam, u in zip(sel.values, sel.vectors.T):
        z = S @ u
        assert np.linalg.norm(KM @ z - lam * z) <= 1e-8


# ---------------------------------------------------------------- kOLPP


def test_kolpp_identity():
    Y = kr.fit_kolpp(np.eye(4), 2)
    assert np.array_equal(Y, kr.fit_kolpp(np.eye(4), 2))
    assert np.allclose(Y @ Y.T, np.eye(2))


def test_kolpp_diagonal():
    assert np.allclose(kr.fit_kolpp(np.diag([1.0, 2.0, 3.0]), 1), [[1, 0, 0]])


def test_kolpp_residual(rng):
    K = _psd(rng, 7)
    Y = kr.fit_kolpp(K, 3)
    lam = np.linalg.eigvalsh(K)[:3]
    for l, v in zip(lam, Y):
        assert np.linalg.norm(K @ v - l * v) <= 1e-8


# ---------------------------------------------------------------- Gram CSV


def test_kernel_fits_use_only_gram(tmp_path, rng):
    X = rng.standard_normal((4, 10))
    K = kr.gram(X)
    kr.save_gram_csv(K, tmp_path / "k.csv")
    K2 = kr.load_gram_csv(tmp_path / "k.csv")
    assert np.array_equal(K.K, K2.K)
    G = build_affinity(X)
    assert np.array_equal(kr.fit_kpca(K, 2), kr.fit_kpca(K2, 2))
    assert np.array_equal(kr.fit_klpp(K, G, 2), kr.fit_klpp(K2, G, 2))


def test_gram_csv_bad(tmp_path):
    (tmp_path / "k.csv").write_text("3\n1,0\n0,1\n")
    with pytest.raises(DataFormatError):
        kr.load_gram_csv(tmp_path / "k.csv")
