import numpy as np
import pytest

from einsteindr import spectral as S
from einsteindr.exceptions import DefinitenessError
from einsteindr.tensor import block_transpose, einstein_product, identity_tensor, unfold


def _sym(rng, n):
    A = rng.standard_normal((n, n))
    return A + A.T


def _spd(rng, n):
    A = rng.standard_normal((n, n))
    return A @ A.T + n * np.eye(n)


# ---------------------------------------------------------------- sym_eig


def test_sym_eig_identity():
    r = S.sym_eig(np.eye(5))
    assert np.allclose(r.values, 1.0)


def test_sym_eig_diagonal():
    r = S.sym_eig(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(r.values, [1, 2, 3])
    assert np.allclose(np.abs(r.vectors), np.eye(3)[:, [1, 2, 0]])


def test_sym_eig_reconstruction(rng):
    A = _sym(rng, 8)
    r = S.sym_eig(A)
    assert np.max(np.abs(r.vectors @ np.diag(r.values) @ r.vectors.T - A)) <= 1e-10
    assert np.max(np.abs(r.vectors.T @ r.vectors - np.eye(8))) <= 1e-10
    assert np.all(np.diff(r.values) >= 0)


def test_sym_eig_sign_convention(rng):
    V = S.sym_eig(_sym(rng, 6)).vectors
    top = V[np.argmax(np.abs(V), axis=0), np.arange(6)]
    assert np.all(top > 0)


def test_sym_eig_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        S.sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


# ---------------------------------------------------------------- gen_sym_eig


def test_gen_identity_b_matches_standard(rng):
    A = _sym(rng, 5)
    a, b = S.gen_sym_eig(A, np.eye(5)), S.sym_eig(A)
    assert np.allclose(a.values, b.values, atol=1e-12)
    assert np.allclose(a.vectors, b.vectors, atol=1e-10)


def test_gen_diagonal():
    r = S.gen_sym_eig(np.diag([2.0, 8.0]), np.diag([1.0, 2.0]))
    assert np.allclose(r.values, [2.0, 4.0])


def test_gen_residual_and_b_orthonormal(rng):
    A, B = _sym(rng, 6), _spd(rng, 6)
    r = S.gen_sym_eig(A, B)
    for lam, v in zip(r.values, r.vectors.T):
        assert np.linalg.norm(A @ v - lam * B @ v) <= 1e-8
    assert np.allclose(r.vectors.T @ B @ r.vectors, np.eye(6), atol=1e-10)


def test_gen_congruence_invariance(rng):
    for _ in range(10):
        A, B = _sym(rng, 5), _spd(rng, 5)
        C = rng.standard_normal((5, 5)) + 3 * np.eye(5)
        a = S.gen_sym_eig(A, B).values
        b = S.gen_sym_eig(C.T @ A @ C, C.T @ B @ C).values
        assert np.max(np.abs(a - b)) <= 1e-8 * max(1.0, np.max(np.abs(a)))


def test_gen_singular_b_gets_ridge():
    B = np.diag([1.0, 0.0])
    r = S.gen_sym_eig(np.eye(2), B)
    assert np.all(np.isfinite(r.values))


def test_gen_indefinite_b():
    with pytest.raises(DefinitenessError):
        S.gen_sym_eig(np.eye(2), np.diag([1.0, -1.0]))


# ---------------------------------------------------------------- esvd


def test_esvd_identity():
    _, s, _ = S.esvd(identity_tensor((2, 3)), 2)
    assert np.allclose(s, 1.0)


def test_esvd_rank_one(rng):
    a, b = rng.random((2, 3)), rng.random(4)
    X = np.multiply.outer(a, b)
    _, s, _ = S.esvd(X, 2)
    assert np.isclose(s[0], np.linalg.norm(a) * np.linalg.norm(b))
    assert np.all(s[1:] < 1e-12)


def test_esvd_squared_values_are_gram_eigenvalues(rng):
    X = rng.random((3, 2, 4))
    U, s, V = S.esvd(X, 2)
    G = einstein_product(block_transpose(X, 2), X, 2)  # 4 x 4
    lam = np.sort(np.linalg.eigvalsh(unfold(G, 1)))[::-1]
    assert np.allclose(np.sort(s**2)[::-1], lam[: len(s)], atol=1e-12)


def test_esvd_reconstructs_and_is_unitary(rng):
    X = rng.random((3, 2, 4))
    U, s, V = S.esvd(X, 2)
    Um, Vm = unfold(U, 2), unfold(V, 1)
    assert np.allclose(Um.T @ Um, np.eye(6), atol=1e-12)
    assert np.allclose(Vm.T @ Vm, np.eye(4), atol=1e-12)
    k = len(s)
    assert np.allclose(Um[:, :k] * s @ Vm[:, :k].T, unfold(X, 2), atol=1e-12)


def test_esvd_left_tensors_are_eigentensors(rng):
    X = rng.random((2, 3, 5))
    U, s, _ = S.esvd(X, 2, full=False)
    A = einstein_product(X, block_transpose(X, 2), 1)  # 2x3x2x3
    for j in range(len(s)):
        u = U[..., j]
        assert np.allclose(einstein_product(A, u, 2), s[j] ** 2 * u, atol=1e-10)


# ---------------------------------------------------------------- select


def _spectrum():
    return S.EigResult(np.array([0.0, 1.0, 2.0, 3.0]), np.eye(4))


def test_select_skip_first():
    r = S.select(_spectrum(), S.SelectSpec(2, "smallest", True))
    assert list(r.values) == [1.0, 2.0]


def test_select_largest():
    assert list(S.select(_spectrum(), S.SelectSpec(1, "largest")).values) == [3.0]


def test_select_bounds():
    three = S.EigResult(np.array([0.0, 1.0, 2.0]), np.eye(3))
    with pytest.raises(ValueError):
        S.select(three, S.SelectSpec(4))


def test_select_never_returns_connected_zero(rng):
    W = rng.random((7, 7))
    W = W + W.T
    L = np.diag(W.sum(1)) - W
    r = S.select(S.sym_eig(L), S.SelectSpec(3, "smallest", True))
    assert r.values[0] > 1e-8


# ---------------------------------------------------------------- range / subspace


def test_range_basis_identity():
    Q = S.range_basis(np.eye(3))
    assert Q.shape == (3, 3) and np.allclose(Q.T @ Q, np.eye(3))


def test_range_basis_rank_one(rng):
    x = rng.random((5, 1))
    Q = S.range_basis(x @ rng.random((1, 4)))
    assert Q.shape == (5, 1) and np.isclose(np.linalg.norm(Q), 1.0)


def test_range_basis_projection(rng):
    X = rng.random((100, 10))
    Q = S.range_basis(X)
    assert Q.shape[1] == 10
    assert np.linalg.norm(Q @ Q.T @ X - X) <= 1e-8


def test_range_basis_zero():
    assert S.range_basis(np.zeros((4, 3))).shape == (4, 0)


def test_subspace_distance_sign_and_rotation(rng):
    P = rng.random((10, 3))
    R, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    assert S.subspace_distance(P, -P @ R) < 1e-12
    assert S.subspace_distance(P, rng.random((10, 3))) > 1e-3


def test_principal_basis_centered(rng):
    X = rng.random((6, 20)) + 5.0
    Q = S.principal_basis(X, 2)
    Xc = X - X.mean(1, keepdims=True)
    U = np.linalg.svd(Xc)[0][:, :2]
    assert S.subspace_distance(Q, U) < 1e-10
