"""Linear tensor projections: PCA, supervised PCA, ONPP, OLPP, LPP, NPP.

Every method returns a :class:`ProjectionModel` holding a projection tensor
``P`` of shape ``I_1 x ... x I_M x d``; new data is embedded with
``Y = P^T *_M X``.

Eigenproblems posed in feature space (size ``I_1 ... I_M``) are first
restricted to a basis ``Q`` of the data's column space, or of its leading
principal subspace when ``pca_dim`` is given. With ``C = Q^T *_M X`` the
reduced problem lives in ``r x r`` and solutions are mapped back by
``P = Q *_1 V``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

import numpy as np

from . import spectral
from .exceptions import RankDeficiencyError, ShapeError
from .graph import WeightGraph, centering_matrix, laplacian_forms
from .spectral import EigResult, SelectSpec
from .tensor import as_tensor, block_transpose, einstein_product, fold, m_mode_product, unfold

ORTHOGONAL = ("pca", "spca", "onpp", "olpp")
ZERO_TOL = 1e-12


@dataclass
class ProjectionModel:
    """Fitted projection.

    ``P`` is a single tensor, or a list with one projection per frontal
    slice of the last feature mode when ``multiweight`` is set.
    """

    method: str
    P: object
    d: int
    feature_shape: tuple
    eigenvalues: np.ndarray | list
    skip_first: bool = False
    multiweight: bool = False
    meta: dict = field(default_factory=dict)

    def matrix(self, r: int | None = None) -> np.ndarray:
        """Unfolded projection ``Psi(P)`` (per slice ``r`` for multi-weight models)."""
        P = self.P[r] if self.multiweight else self.P
        return np.reshape(P, (-1, P.shape[-1]), order="F")


def _data(X):
    X = as_tensor(X)
    if X.ndim < 2:
        raise ShapeError("data tensor needs at least one feature mode and a sample mode")
    return X


def _weights(W):
    return W.W if isinstance(W, WeightGraph) else np.asarray(W, dtype=np.float64)


def _reduce(X, pca_dim, tol):
    """Return the folded basis ``Q`` and coordinates ``C = Q^T *_M X``."""
    M = X.ndim - 1
    Qm = spectral.restriction_basis(unfold(X, M), pca_dim, tol)
    if Qm.shape[1] == 0:
        raise RankDeficiencyError("data has rank zero")
    Q = fold(Qm, X.shape[:M] + (Qm.shape[1],), M)
    C = einstein_product(block_transpose(Q, M), X, M)
    return Q, C


def _lift(Q, V):
    return einstein_product(Q, V, 1)


def _check_d(d, avail, what="restricted problem"):
    if d < 1:
        raise ValueError("d must be >= 1")
    if d > avail:
        raise RankDeficiencyError(f"{what} has dimension {avail}, cannot return d={d}")


def _solve_reduced(C, A, d, side, skip_first, B=None):
    """Eigenpairs of ``C A C^T`` (optionally against ``C B C^T``)."""
    r = C.shape[0]
    _check_d(d + int(skip_first), r)
    op = C @ A @ C.T
    op = 0.5 * (op + op.T)
    if B is None:
        # a zero operator makes every direction optimal; the generalized
        # problems stay well posed through their right-hand side
        if np.max(np.abs(op)) <= ZERO_TOL * max(1.0, np.max(np.abs(C)) ** 2):
            raise RankDeficiencyError("operator vanishes on the data; no informative directions")
        res = spectral.sym_eig(op)
    else:
        rhs = C @ B @ C.T
        res = spectral.gen_sym_eig(op, 0.5 * (rhs + rhs.T))
    return spectral.select(res, SelectSpec(d, side, skip_first))


def _model(method, X, Q, sel: EigResult, d, skip_first, **meta):
    P = _lift(Q, sel.vectors)
    return ProjectionModel(
        method=method,
        P=P,
        d=d,
        feature_shape=X.shape[:-1],
        eigenvalues=sel.values,
        skip_first=skip_first,
        meta=dict(meta, rank=Q.shape[-1]),
    )


def fit_pca(X, d: int, route: str = "auto") -> ProjectionModel:
    """Leading ``d`` left singular tensors of the centered data ``X x_{M+1} H``.

    ``route`` is ``primal`` (E-SVD in feature space), ``dual`` (eigenproblem
    of the ``n x n`` Gram matrix of the centered data) or ``auto``, which
    goes dual when the feature count exceeds ``n``.
    """
    X = _data(X)
    M = X.ndim - 1
    n = X.shape[-1]
    if not 1 <= d <= n - 1:
        raise ValueError(f"d must satisfy 1 <= d <= n-1 = {n - 1}, got {d}")
    if route == "auto":
        route = "dual" if prod(X.shape[:M]) > n else "primal"
    Z = m_mode_product(X, centering_matrix(n), M + 1)
    if route == "primal":
        if M == 1:
            U, s, _ = np.linalg.svd(Z, full_matrices=False)
            U = spectral.fix_signs(U)
            P = U[:, :d]
        else:
            U, s, _ = spectral.esvd(Z, M, full=False)
            P = np.reshape(unfold(U, M)[:, :d], X.shape[:M] + (d,), order="F")
        values = s[:d] ** 2
    elif route == "dual":
        Gm = einstein_product(block_transpose(Z, M), Z, M)
        sel = spectral.select(spectral.sym_eig(Gm), SelectSpec(d, "largest"))
        if np.any(sel.values <= ZERO_TOL * max(1.0, sel.values[0])):
            raise RankDeficiencyError("centered data has fewer than d nonzero singular values")
        P = einstein_product(Z, sel.vectors, 1)
        Pm = np.reshape(P, (-1, d), order="F")
        Pm = spectral.fix_signs(Pm / np.linalg.norm(Pm, axis=0))
        P = np.reshape(Pm, X.shape[:M] + (d,), order="F")
        values = sel.values
    else:
        raise ValueError(f"unknown route {route!r}")
    return ProjectionModel("pca", as_tensor(P), d, X.shape[:-1], values, meta={"route": route})


def delta_kernel(labels) -> np.ndarray:
    labels = np.asarray(labels)
    return (labels[:, None] == labels[None, :]).astype(np.float64)


def fit_spca(X, labels, d: int, label_kernel=None, tol: float = 1e-10) -> ProjectionModel:
    """Supervised PCA: leading eigen-tensors of ``X x_{M+1} (H K_L H) *_1 X^T``.

    ``label_kernel`` defaults to the delta kernel on ``labels``; any ``n x n``
    matrix may be passed instead.
    """
    X = _data(X)
    n = X.shape[-1]
    if label_kernel is None:
        if labels is None:
            raise ValueError("supervised PCA needs labels or a label kernel")
        KL = delta_kernel(labels)
    else:
        KL = np.asarray(label_kernel, dtype=np.float64)
    if KL.shape != (n, n):
        raise ShapeError(f"label kernel must be {n}x{n}")
    H = centering_matrix(n)
    Q, C = _reduce(X, None, tol)
    sel = _solve_reduced(C, H @ KL @ H, d, "largest", False)
    return _model("spca", X, Q, sel, d, False)


def residual_matrix(W) -> np.ndarray:
    """``(I - W)^T (I - W)``, the quadratic form of the reconstruction error."""
    W = _weights(W)
    IW = np.eye(W.shape[0]) - W
    return IW.T @ IW


def row_normalize(W) -> np.ndarray:
    W = _weights(W).copy()
    np.fill_diagonal(W, 0.0)
    s = W.sum(axis=1, keepdims=True)
    return np.divide(W, s, out=np.zeros_like(W), where=s > 0)


def fit_onpp(X, W, d: int, pca_dim=None, skip_first: bool = False, tol: float = 1e-10):
    """Smallest ``d`` eigen-tensors of ``X x_{M+1} (I-W)^T(I-W) *_1 X^T`` with ``P^T P = I``."""
    X = _data(X)
    Q, C = _reduce(X, pca_dim, tol)
    sel = _solve_reduced(C, residual_matrix(W), d, "smallest", skip_first)
    return _model("onpp", X, Q, sel, d, skip_first, pca_dim=pca_dim)


def fit_olpp(X, W, d: int, pca_dim=None, skip_first: bool = False, tol: float = 1e-10,
             signed: bool = False):
    """Smallest ``d`` eigen-tensors of ``X x_{M+1} L *_1 X^T`` with ``P^T P = I``."""
    X = _data(X)
    lap = laplacian_forms(_weights(W), signed=signed)
    Q, C = _reduce(X, pca_dim, tol)
    sel = _solve_reduced(C, lap.L, d, "smallest", skip_first)
    return _model("olpp", X, Q, sel, d, skip_first, pca_dim=pca_dim)


def fit_lpp(X, W, d: int, pca_dim=None, skip_first: bool = False, tol: float = 1e-10,
            signed: bool = False):
    """Generalized problem ``X L X^T v = lambda X D X^T v`` (Einstein form), smallest ``d``."""
    X = _data(X)
    lap = laplacian_forms(_weights(W), signed=signed)
    Q, C = _reduce(X, pca_dim, tol)
    sel = _solve_reduced(C, lap.L, d, "smallest", skip_first, B=np.diag(lap.D))
    return _model("lpp", X, Q, sel, d, skip_first, pca_dim=pca_dim)


def fit_npp(X, W, d: int, pca_dim=None, skip_first: bool = False, tol: float = 1e-10):
    """Generalized problem ``X M X^T v = lambda X X^T v``, smallest ``d``."""
    X = _data(X)
    n = X.shape[-1]
    Q, C = _reduce(X, pca_dim, tol)
    sel = _solve_reduced(C, residual_matrix(W), d, "smallest", skip_first, B=np.eye(n))
    return _model("npp", X, Q, sel, d, skip_first, pca_dim=pca_dim)


FITTERS = {"onpp": fit_onpp, "olpp": fit_olpp, "lpp": fit_lpp, "npp": fit_npp}


def slice_data(X, r: int) -> np.ndarray:
    """Sub-tensor ``X[..., r, :]`` (0-based ``r`` over the last feature mode)."""
    X = _data(X)
    if X.ndim < 3:
        raise ShapeError("multi-weight methods need at least two feature modes")
    return as_tensor(X[..., r, :])


def fit_multiweight(X, Wten, d: int, method: str, **kw) -> ProjectionModel:
    """Solve ``method`` independently on each frontal slice of the last feature mode.

    ``Wten`` holds one weight matrix per slice: a sequence of graphs or an
    ``n x n x I_M`` array.
    """
    X = _data(X)
    if method not in FITTERS:
        raise ValueError(f"multi-weight supports {sorted(FITTERS)}, got {method!r}")
    if X.ndim < 3:
        raise ShapeError("multi-weight methods need at least two feature modes")
    IM = X.shape[-2]
    if isinstance(Wten, np.ndarray) and Wten.ndim == 3:
        Ws = [Wten[:, :, r] for r in range(Wten.shape[2])]
    else:
        Ws = list(Wten)
    if len(Ws) != IM:
        raise ShapeError(f"need {IM} slice weights, got {len(Ws)}")
    Ps, vals, ranks = [], [], []
    for r in range(IM):
        try:
            m = FITTERS[method](slice_data(X, r), Ws[r], d, **kw)
        except Exception as exc:
            raise type(exc)(f"slice {r}: {exc}") from exc
        Ps.append(m.P)
        vals.append(m.eigenvalues)
        ranks.append(m.meta.get("rank"))
    return ProjectionModel(
        method=method,
        P=Ps,
        d=d,
        feature_shape=X.shape[:-1],
        eigenvalues=vals,
        skip_first=kw.get("skip_first", False),
        multiweight=True,
        meta={"rank": ranks, "pca_dim": kw.get("pca_dim")},
    )


def transform(model: ProjectionModel, X) -> np.ndarray:
    """Embed samples: ``d x n`` for single-weight, ``d x I_M x n`` for multi-weight."""
    X = _data(X)
    if tuple(X.shape[:-1]) != tuple(model.feature_shape):
        raise ShapeError(f"features {X.shape[:-1]} do not match model {model.feature_shape}")
    M = X.ndim - 1
    if not model.multiweight:
        return einstein_product(block_transpose(model.P, M), X, M)
    parts = []
    for r, P in enumerate(model.P):
        parts.append(einstein_product(block_transpose(P, M - 1), slice_data(X, r), M - 1))
    return as_tensor(np.stack(parts, axis=1))


def flatten_embedding(Y) -> np.ndarray:
    """Samples as columns: multi-weight ``d x I_M x n`` becomes ``(d I_M) x n``."""
    Y = np.asarray(Y)
    return np.reshape(Y, (-1, Y.shape[-1]), order="F")
