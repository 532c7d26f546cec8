"""Reference implementations used to check the tensor code.

Everything here works on plain matrices (one sample per column) and calls
``scipy.linalg`` directly, sharing no solver code with the tensor path. The
restriction and ridge policies are re-implemented with the same constants so
that both routes pose the same eigenproblem.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

MAX_ELEMENTS = 10**6
RIDGE = 1e-10
RANGE_TOL = 1e-10

MATRIX_METHODS = ("pca", "lpp", "olpp", "onpp", "npp", "lle", "le")


@dataclass
class OracleResult:
    name: str
    P: np.ndarray | None = None  # m x d projection for linear methods
    Y: np.ndarray | None = None  # d x n training embedding
    values: np.ndarray | None = None
    state: dict = field(default_factory=dict)


@dataclass
class OracleReport:
    pair: str
    subspace_distance: float
    procrustes_distance: float = 0.0
    ir_delta: float = 0.0
    residual: float = 0.0

    def row(self) -> str:
        return (
            f"{self.pair:<12} subspace={self.subspace_distance:.3e} "
            f"procrustes={self.procrustes_distance:.3e} ir_delta={self.ir_delta:+.2f} "
            f"residual={self.residual:.3e}"
        )


def _flip(V):
    idx = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[idx, np.arange(V.shape[1])])
    s[s == 0] = 1
    return V * s


def _basis(X, pca_dim):
    if pca_dim is None:
        U, s, _ = scipy.linalg.svd(X, full_matrices=False)
    else:
        U, s, _ = scipy.linalg.svd(X - X.mean(axis=1, keepdims=True), full_matrices=False)
    keep = s > RANGE_TOL * s[0]
    U = U[:, keep]
    return U if pca_dim is None else U[:, : int(pca_dim)]


def _eigh(A, B=None):
    A = 0.5 * (A + A.T)
    if B is None:
        return scipy.linalg.eigh(A)
    B = 0.5 * (B + B.T)
    n = B.shape[0]
    level = RIDGE * np.trace(B) / n
    if scipy.linalg.eigh(B, eigvals_only=True)[0] < level:
        B = B + level * np.eye(n)
    return scipy.linalg.eigh(A, B)


def _pick(w, V, d, largest=False, skip=False):
    order = np.argsort(w)[::-1] if largest else np.argsort(w)
    idx = order[int(skip): int(skip) + d]
    if len(idx) < d:
        raise ValueError(f"only {len(order) - int(skip)} eigenpairs available for d={d}")
    return w[idx], _flip(V[:, idx])


def laplacian(W):
    W = np.asarray(W, dtype=np.float64)
    return np.diag(W.sum(axis=1)) - W


def residual_form(W):
    IW = np.eye(W.shape[0]) - np.asarray(W, dtype=np.float64)
    return IW.T @ IW


def lle_weights_kkt(X, nbrs, reg=1e-3, cond_max=1e12, T=None):
    """Reconstruction weights by solving each bordered KKT system densely.

    ``X`` holds samples as columns; row ``i`` of ``nbrs`` lists the
    neighbours of target ``i`` (column ``i`` of ``T``, default ``X``).
    Minimizes ``||t - N w||^2`` subject to ``sum(w) = 1``.
    """
    X = np.asarray(X, dtype=np.float64)
    T = X if T is None else np.asarray(T, dtype=np.float64)
    nt, k = nbrs.shape
    out = np.zeros((nt, k))
    for i in range(nt):
        Z = X[:, nbrs[i]] - T[:, [i]]
        G = Z.T @ Z
        if np.linalg.cond(G) > cond_max:
            tr = np.trace(G)
            G = G + (reg * tr / k if tr > 0 else reg) * np.eye(k)
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = 2 * G
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.zeros(k + 1)
        rhs[k] = 1.0
        out[i] = scipy.linalg.solve(kkt, rhs)[:k]
    return out


def neighbours(key, k, exclude_self=True):
    key = np.array(key, dtype=np.float64, copy=True)
    if exclude_self:
        np.fill_diagonal(key, np.inf)
    return np.argsort(key, axis=1, kind="stable")[:, :k]


def sq_distances(A, B):
    """Squared distances between columns of ``A`` and columns of ``B`` by direct loops."""
    out = np.empty((A.shape[1], B.shape[1]))
    for i in range(A.shape[1]):
        diff = B - A[:, [i]]
        out[i] = np.sum(diff * diff, axis=0)
    return out


def matrix_lle_weights(X, k, reg=1e-3, labels=None, mu=0.2):
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[1]
    d2 = sq_distances(X, X)
    key = d2
    if labels is not None:
        labels = np.asarray(labels)
        key = d2 + mu * (labels[:, None] != labels[None, :]) * d2.max()
    nb = neighbours(key, k)
    w = lle_weights_kkt(X, nb, reg)
    W = np.zeros((n, n))
    for i in range(n):
        W[i, nb[i]] = w[i]
    return W


def matrix_method(name, X, W=None, d=2, pca_dim=None, skip_first=None, k=7, reg=1e-3):
    """Classical matrix solution of ``name`` on ``X`` (features x samples).

    ``W`` is the graph for lpp/olpp/le, the reconstruction weights for
    onpp/npp, and optional for lle (computed with ``k``/``reg`` when absent).
    """
    if name not in MATRIX_METHODS:
        raise ValueError(f"unknown method {name!r}; choose from {MATRIX_METHODS}")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("oracle works on matrices")
    if skip_first is None:
        skip_first = name in ("le", "lle")
    if name == "pca":
        Xc = X - X.mean(axis=1, keepdims=True)
        U, s, _ = scipy.linalg.svd(Xc, full_matrices=False)
        return OracleResult(name, P=_flip(U[:, :d]), values=s[:d] ** 2)
    if name == "le":
        W = np.asarray(W, dtype=np.float64)
        deg = W.sum(axis=1)
        w, U = scipy.linalg.eigh(laplacian(W), np.diag(deg))
        vals, U = _pick(w, U, d, skip=skip_first)
        return OracleResult(name, Y=U.T.copy(), values=vals, state={"U": U, "deg": deg, "W": W})
    if name == "lle":
        if W is None:
            W = matrix_lle_weights(X, k, reg)
        w, V = scipy.linalg.eigh(residual_form(W))
        vals, V = _pick(w, V, d, skip=skip_first)
        return OracleResult(name, Y=V.T.copy(), values=vals, state={"X": X, "k": k, "reg": reg})
    W = np.asarray(W, dtype=np.float64)
    Q = _basis(X, pca_dim)
    C = Q.T @ X
    if name == "olpp":
        w, V = _eigh(C @ laplacian(W) @ C.T)
    elif name == "onpp":
        w, V = _eigh(C @ residual_form(W) @ C.T)
    elif name == "lpp":
        w, V = _eigh(C @ laplacian(W) @ C.T, C @ np.diag(W.sum(axis=1)) @ C.T)
    else:  # npp
        w, V = _eigh(C @ residual_form(W) @ C.T, C @ C.T)
    vals, V = _pick(w, V, d, skip=skip_first)
    return OracleResult(name, P=Q @ V, values=vals)


def oos_le(res: OracleResult, w_t):
    """LE placement of test affinities ``w_t`` (``n x n_t``) in random-walk form.

    ``y = U^T w_t / ((1 - lambda) d_t)`` with ``U`` the D-normalized
    generalized eigenvectors; equal to the rescaled kernel formula.
    """
    w_t = np.asarray(w_t, dtype=np.float64).reshape(res.state["U"].shape[0], -1)
    dt = w_t.sum(axis=0)
    return (res.state["U"].T @ w_t) / (1.0 - res.values)[:, None] / dt[None, :]


def oos_lle(res: OracleResult, Xt, k=None, reg=None):
    X = res.state["X"]
    k = res.state["k"] if k is None else k
    reg = res.state["reg"] if reg is None else reg
    Xt = np.asarray(Xt, dtype=np.float64)
    nb = neighbours(sq_distances(Xt, X), k, exclude_self=False)
    w = lle_weights_kkt(X, nb, reg, T=Xt)
    Yt = np.zeros((res.Y.shape[0], Xt.shape[1]))
    for t in range(Xt.shape[1]):
        Yt[:, t] = res.Y[:, nb[t]] @ w[t]
    return Yt


def brute_contract(A, B, N: int) -> np.ndarray:
    """Einstein product by explicit summation over every index."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.size + B.size > MAX_ELEMENTS:
        raise ValueError(f"operands too large for the brute-force oracle ({A.size + B.size})")
    if N > A.ndim or N > B.ndim or A.shape[A.ndim - N:] != B.shape[:N]:
        raise ValueError("operands are not conformable")
    left = A.shape[: A.ndim - N]
    mid = B.shape[:N]
    right = B.shape[N:]
    C = np.zeros(left + right)
    for i in itertools.product(*(range(s) for s in left)):
        for j in itertools.product(*(range(s) for s in right)):
            acc = 0.0
            for kk in itertools.product(*(range(s) for s in mid)):
                acc += A[i + kk] * B[kk + j]
            C[i + j] = acc
    return C


def _orth(P):
    P = np.asarray(P, dtype=np.float64)
    P = P.reshape(-1, P.shape[-1], order="F")
    Q, _ = np.linalg.qr(P)
    return Q


def subspace_distance(P1, P2) -> float:
    Q1, Q2 = _orth(P1), _orth(P2)
    if Q1.shape[0] != Q2.shape[0]:
        raise ValueError("bases have different ambient dimension")
    D = Q1 @ Q1.T - Q2 @ Q2.T
    return float(np.linalg.norm(D))


def procrustes_distance(Y1, Y2) -> float:
    """Largest per-sample distance after the best orthogonal alignment of ``Y2`` to ``Y1``."""
    Y1 = np.asarray(Y1, dtype=np.float64)
    Y2 = np.asarray(Y2, dtype=np.float64)
    if Y1.shape != Y2.shape:
        raise ValueError(f"embeddings differ in shape: {Y1.shape} vs {Y2.shape}")
    U, _, Vt = np.linalg.svd(Y1 @ Y2.T)
    R = U @ Vt
    return float(np.max(np.linalg.norm(Y1 - R @ Y2, axis=0)))


def compare(pair, tensor_result, matrix_result, ir_tensor=None, ir_matrix=None,
            embeddings=None) -> OracleReport:
    """Subspace distance of two projections (``m x d``) or two embeddings (``d x n``).

    Embeddings are compared through their row spaces. ``embeddings`` may
    hold a pair of ``d x n`` arrays for the Procrustes distance.
    """
    A = np.asarray(tensor_result, dtype=np.float64)
    B = np.asarray(matrix_result, dtype=np.float64)
    A = A.reshape(-1, A.shape[-1], order="F")
    B = B.reshape(-1, B.shape[-1], order="F")
    if A.shape != B.shape:
        raise ValueError(f"results differ in shape: {A.shape} vs {B.shape}")
    # d x n embeddings have n > d columns; compare row spaces then
    if A.shape[1] > A.shape[0]:
        A, B = A.T, B.T
    dist = subspace_distance(A, B)
    proc = 0.0
    if embeddings is not None:
        proc = procrustes_distance(*embeddings)
    delta = 0.0
    if ir_tensor is not None and ir_matrix is not None:
        delta = float(ir_tensor - ir_matrix)
    return OracleReport(pair, dist, proc, delta)


def nn_labels(train, train_labels, test):
    """Brute-force 1-NN with ties to the lowest index (columns are samples)."""
    d2 = sq_distances(np.asarray(test, dtype=np.float64), np.asarray(train, dtype=np.float64))
    return np.asarray(train_labels)[np.argmin(d2, axis=1)]
