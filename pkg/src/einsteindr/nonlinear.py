"""Laplacian Eigenmaps and Locally Linear Embedding with out-of-sample maps.

Both methods embed the training samples directly (``Y`` is ``d x n``) and
keep enough state to place new samples afterwards.

LE out-of-sample: the embedding comes from the smallest eigenpairs
``(lambda_j, v_j)`` of ``L_n = I - K`` where ``K = D^{-1/2} W D^{-1/2}`` is
the normalized affinity kernel, so ``K v_j = mu_j v_j`` with
``mu_j = 1 - lambda_j``. A test point with affinity row ``w_t`` (same
Gaussian rule as training) is normalized to
``k_t[i] = w_t[i] / sqrt(d_t D_i)`` with ``d_t = sum(w_t)`` and mapped to
``y_t = diag(mu)^{-1} V^T k_t``. For a training sample this reproduces its
column of ``V^T``; dividing by ``sqrt(d_t)`` then matches the rescaled
training embedding ``Y = V^T D^{-1/2}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _accel, spectral
from .exceptions import RankDeficiencyError, ShapeError
from .graph import (
    DEFAULT_K,
    DEFAULT_MU,
    DEFAULT_REG,
    WeightGraph,
    laplacian_forms,
    lle_weights,
    reconstruction_weights,
    sample_rows,
)
from .spectral import SelectSpec
from .tensor import as_tensor

ZERO_EIG = 1e-10


@dataclass
class EmbeddingModel:
    kind: str  # "le" or "lle"
    Y: np.ndarray
    d: int
    values: np.ndarray
    vectors: np.ndarray | None = None
    degrees: np.ndarray | None = None
    train_rows: np.ndarray | None = None
    feature_shape: tuple = ()
    k: int | None = None
    reg: float | None = None
    sigma: float | None = None
    skip_first: bool = True
    meta: dict = field(default_factory=dict)


def fit_le(X, W, d: int, skip_first: bool = True, signed: bool = False) -> EmbeddingModel:
    """Embedding from eigenvectors 2..d+1 of the normalized Laplacian, rescaled by ``D^{-1/2}``.

    ``W`` is the training affinity; its ``meta`` (sigma, k) is kept so test
    affinities follow the same rule.
    """
    X = as_tensor(X)
    G = W if isinstance(W, WeightGraph) else WeightGraph(np.asarray(W, dtype=np.float64), True)
    n = G.n
    if X.shape[-1] != n:
        raise ShapeError(f"graph has {n} vertices, data has {X.shape[-1]} samples")
    lap = laplacian_forms(G, signed=signed)
    res = spectral.sym_eig(lap.Ln)
    if d + int(skip_first) > n:
        raise ValueError(f"need {d + int(skip_first)} eigenpairs, graph has {n} vertices")
    nzero = int(np.sum(np.abs(res.values) <= ZERO_EIG * max(1.0, np.abs(res.values).max())))
    if skip_first and nzero >= d + 1:
        raise RankDeficiencyError(
            f"graph has {nzero} components; eigenvalue 0 fills all {d} retained slots"
        )
    sel = spectral.select(res, SelectSpec(d, "smallest", skip_first))
    with np.errstate(divide="ignore"):
        s = np.where(lap.D > 0, 1.0 / np.sqrt(np.abs(lap.D)), 0.0)
    Y = sel.vectors.T * s[None, :]
    return EmbeddingModel(
        kind="le",
        Y=Y,
        d=d,
        values=sel.values,
        vectors=sel.vectors,
        degrees=lap.D,
        train_rows=sample_rows(X),
        feature_shape=X.shape[:-1],
        k=G.meta.get("k"),
        sigma=G.meta.get("sigma"),
        skip_first=skip_first,
        meta=dict(G.meta),
    )


def le_affinity(model: EmbeddingModel, Xt) -> np.ndarray:
    """Affinity rows (``n x n_t``) of test samples to the training set."""
    if model.sigma is None:
        raise ValueError("model has no Gaussian scale; pass affinity rows to oos_le directly")
    Xt = as_tensor(Xt)
    if tuple(Xt.shape[:-1]) != tuple(model.feature_shape):
        raise ShapeError(f"features {Xt.shape[:-1]} do not match model {model.feature_shape}")
    d2 = _accel.cross_sq_dists(sample_rows(Xt), model.train_rows)
    Kt = np.exp(-d2 / model.sigma**2)
    if model.k is not None:
        nbrs = _accel.knn_select(d2, model.k, exclude_self=False)
        mask = np.zeros_like(Kt, dtype=bool)
        mask[np.repeat(np.arange(Kt.shape[0]), model.k), nbrs.ravel()] = True
        Kt = np.where(mask, Kt, 0.0)
    return Kt.T


def oos_le(model: EmbeddingModel, k_t, rescale: bool = False) -> np.ndarray:
    """Out-of-sample coordinates from affinity rows ``k_t`` (length ``n`` or ``n x n_t``).

    Returns the coordinates before the ``D^{-1/2}`` rescale unless
    ``rescale`` is set, in which case each column is divided by
    ``sqrt(d_t)``. Zero affinity maps to zero.
    """
    if model.kind != "le":
        raise ValueError("model is not a Laplacian eigenmap")
    k_t = np.asarray(k_t, dtype=np.float64)
    vec = k_t.ndim == 1
    Kt = k_t[:, None] if vec else k_t
    if Kt.shape[0] != model.vectors.shape[0]:
        raise ShapeError(f"affinity has {Kt.shape[0]} rows, model has {model.vectors.shape[0]}")
    mu = 1.0 - model.values
    if np.any(np.abs(mu) <= ZERO_EIG):
        raise ZeroDivisionError("retained eigenvalue of the normalized kernel is zero")
    dt = Kt.sum(axis=0)
    with np.errstate(divide="ignore"):
        sD = np.where(model.degrees > 0, 1.0 / np.sqrt(np.abs(model.degrees)), 0.0)
        st = np.where(dt > 0, 1.0 / np.sqrt(np.abs(dt)), 0.0)
    Khat = Kt * sD[:, None] * st[None, :]
    Yt = (model.vectors.T @ Khat) / mu[:, None]
    if rescale:
        Yt = Yt * st[None, :]
    return Yt[:, 0] if vec else Yt


def transform_le(model: EmbeddingModel, Xt) -> np.ndarray:
    """Test embedding on the same scale as ``model.Y``."""
    return oos_le(model, le_affinity(model, Xt), rescale=True)


def fit_lle(
    X,
    k: int = DEFAULT_K,
    d: int = 2,
    reg: float = DEFAULT_REG,
    labels=None,
    mu: float = DEFAULT_MU,
    W=None,
    skip_first: bool = True,
) -> EmbeddingModel:
    """Embedding from eigenvectors 2..d+1 of ``(I - W)^T (I - W)``.

    ``W`` defaults to :func:`graph.lle_weights`; passing ``labels`` gives
    the supervised variant with modified neighbour distances.
    """
    X = as_tensor(X)
    n = X.shape[-1]
    if d + int(skip_first) > n:
        raise ValueError(f"need {d + int(skip_first)} eigenpairs, only {n} samples")
    if W is None:
        W = lle_weights(X, k, reg, labels=labels, mu=mu)
    Wm = W.W if isinstance(W, WeightGraph) else np.asarray(W, dtype=np.float64)
    IW = np.eye(n) - Wm
    res = spectral.sym_eig(IW.T @ IW)
    sel = spectral.select(res, SelectSpec(d, "smallest", skip_first))
    return EmbeddingModel(
        kind="lle",
        Y=sel.vectors.T.copy(),
        d=d,
        values=sel.values,
        vectors=sel.vectors,
        train_rows=sample_rows(X),
        feature_shape=X.shape[:-1],
        k=k,
        reg=reg,
        skip_first=skip_first,
        meta={"supervised": labels is not None, "mu": mu if labels is not None else None},
    )


def oos_lle(model: EmbeddingModel, Xt, k: int | None = None, reg: float | None = None,
            return_weights: bool = False):
    """Place test samples by reconstructing them from ``k`` training neighbours.

    ``y_t = sum_j w_j Y^{(j)}`` with the affine weights of the test-local
    Gram system. Returns a ``d x n_t`` matrix, plus ``(nbrs, w)`` when
    ``return_weights`` is set.
    """
    if model.kind != "lle":
        raise ValueError("model is not an LLE embedding")
    Xt = as_tensor(Xt)
    if tuple(Xt.shape[:-1]) != tuple(model.feature_shape):
        raise ShapeError(f"features {Xt.shape[:-1]} do not match model {model.feature_shape}")
    k = model.k if k is None else k
    reg = model.reg if reg is None else reg
    nbrs, w = reconstruction_weights(sample_rows(Xt), model.train_rows, k, reg)
    Yt = np.einsum("dtk,tk->dt", model.Y[:, nbrs], w)
    if return_weights:
        return Yt, (nbrs, w)
    return Yt
