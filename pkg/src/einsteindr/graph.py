"""Affinity graphs and the matrices derived from them.

Samples are the frontal slices of a data tensor (last mode indexes samples).
All graph matrices are dense ``n x n`` arrays.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _accel
from .exceptions import DegenerateGeometryError, ShapeError
from .tensor import as_tensor

DEFAULT_K = 7
DEFAULT_REG = 1e-3
DEFAULT_MU = 0.2
COND_MAX = 1e12


@dataclass
class WeightGraph:
    """Affinity matrix plus a record of how it was built."""

    W: np.ndarray
    symmetric: bool
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.W.shape[0]


@dataclass
class LaplacianForms:
    D: np.ndarray  # degree vector (diagonal of the degree matrix)
    L: np.ndarray
    Ln: np.ndarray
    M: np.ndarray
    H: np.ndarray


def sample_rows(X) -> np.ndarray:
    """One flattened sample per row, flattening each slice in ivec order."""
    X = as_tensor(X)
    if X.ndim < 2:
        raise ShapeError("data tensor needs a feature mode and a sample mode")
    return np.reshape(X, (-1, X.shape[-1]), order="F").T


def pairwise_sq_dists(X) -> np.ndarray:
    """Squared Frobenius distances between all pairs of samples."""
    S = sample_rows(X)
    if S.shape[0] < 2:
        raise ValueError("need at least two samples")
    return _accel.sq_dists(S)


def auto_sigma(d2) -> float:
    """Half the median of the pairwise distances (not squared) over i < j."""
    d2 = np.asarray(d2, dtype=np.float64)
    iu = np.triu_indices(d2.shape[0], 1)
    return 0.5 * float(np.median(np.sqrt(np.maximum(d2[iu], 0.0))))


def _as_graph(W) -> WeightGraph:
    if isinstance(W, WeightGraph):
        return W
    W = np.asarray(W, dtype=np.float64)
    return WeightGraph(W, bool(np.array_equal(W, W.T)), {"kind": "dense"})


def gaussian_weights(d2, sigma="auto", threshold: float | None = None) -> WeightGraph:
    """Heat-kernel affinity ``exp(-d2 / sigma^2)``.

    ``sigma="auto"`` uses :func:`auto_sigma`. Entries below ``threshold`` are
    set to zero when a threshold is given.
    """
    d2 = np.asarray(d2, dtype=np.float64)
    if d2.ndim != 2 or d2.shape[0] != d2.shape[1]:
        raise ShapeError("distance matrix must be square")
    if isinstance(sigma, str):
        if sigma != "auto":
            raise ValueError(f"unknown sigma rule {sigma!r}")
        sigma = auto_sigma(d2)
    sigma = float(sigma)
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    W = np.exp(-d2 / sigma**2)
    if threshold is not None:
        W[W < threshold] = 0.0
    W = 0.5 * (W + W.T)
    return WeightGraph(W, True, {"kind": "gaussian", "sigma": sigma, "threshold": threshold})


def knn_sparsify(G, k: int, mode: str = "union", d2=None) -> WeightGraph:
    """Keep ``W_ij`` only where ``j`` is among the ``k`` nearest neighbours of ``i``.

    Nearness is read from ``d2`` when given, otherwise from the weights
    themselves (larger weight means nearer). Self pairs never count as
    neighbours and the diagonal is left as it was. ``union`` symmetrizes by
    the elementwise max, ``mutual`` by the min.
    """
    G = _as_graph(G)
    W = G.W
    n = W.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < {n}, got {k}")
    if mode not in ("union", "mutual"):
        raise ValueError(f"unknown mode {mode!r}")
    key = np.asarray(d2, dtype=np.float64) if d2 is not None else -W
    nbrs = _accel.knn_select(key, k, exclude_self=True)
    mask = np.zeros((n, n), dtype=bool)
    mask[np.repeat(np.arange(n), k), nbrs.ravel()] = True
    Wk = np.where(mask, W, 0.0)
    Wk = np.maximum(Wk, Wk.T) if mode == "union" else np.minimum(Wk, Wk.T)
    np.fill_diagonal(Wk, np.diag(W))
    meta = dict(G.meta, k=k, knn_mode=mode)
    return WeightGraph(Wk, True, meta)


def supervised_weights(G, labels) -> WeightGraph:
    """Zero every weight joining samples of different classes."""
    G = _as_graph(G)
    if labels is None:
        raise ValueError("supervised weights need class labels")
    labels = np.asarray(labels)
    if labels.shape != (G.n,):
        raise ShapeError(f"expected {G.n} labels, got {labels.shape}")
    same = labels[:, None] == labels[None, :]
    return WeightGraph(np.where(same, G.W, 0.0), G.symmetric, dict(G.meta, supervised=True))


def repulsion_weights(labels, edges=None) -> WeightGraph:
    """Unit weights on edges joining different classes.

    ``edges`` is a boolean ``n x n`` adjacency (e.g. a k-NN pattern); ``None``
    means the fully connected graph.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    diff = labels[:, None] != labels[None, :]
    if edges is not None:
        edges = np.asarray(edges, dtype=bool)
        if edges.shape != (n, n):
            raise ShapeError(f"edge pattern must be {n}x{n}")
        diff &= edges
    np.fill_diagonal(diff, False)
    Wr = diff.astype(np.float64)
    return WeightGraph(Wr, bool(np.array_equal(Wr, Wr.T)), {"kind": "repulsion"})


def knn_edges(d2, k: int) -> np.ndarray:
    """Symmetric (union) boolean k-NN adjacency built from squared distances."""
    d2 = np.asarray(d2, dtype=np.float64)
    n = d2.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < {n}, got {k}")
    nbrs = _accel.knn_select(d2, k, exclude_self=True)
    E = np.zeros((n, n), dtype=bool)
    E[np.repeat(np.arange(n), k), nbrs.ravel()] = True
    return E | E.T


def combine_repulsion(G, Gr, beta: float = 1.0) -> WeightGraph:
    """``W + beta * Wr``."""
    G = _as_graph(G)
    Gr = _as_graph(Gr)
    if G.W.shape != Gr.W.shape:
        raise ShapeError(f"graphs differ in size: {G.W.shape} vs {Gr.W.shape}")
    W = G.W + beta * Gr.W
    return WeightGraph(W, G.symmetric and Gr.symmetric, dict(G.meta, beta=beta, repulsion=True))


def centering_matrix(n: int) -> np.ndarray:
    return np.eye(n) - np.full((n, n), 1.0 / n)


def laplacian_forms(G, signed: bool = False) -> LaplacianForms:
    """Degree vector, ``L = D - W``, normalized ``L_n``, ``M = (I - W)^T (I - W)`` and ``H``.

    Negative weights are rejected unless ``signed`` is set (repulsion graphs
    with a negative ``beta``). Zero-degree vertices get a zero entry in
    ``D^{-1/2}``.
    """
    G = _as_graph(G)
    W = G.W
    n = W.shape[0]
    if W.ndim != 2 or W.shape[1] != n:
        raise ShapeError("weight matrix must be square")
    if not signed and np.any(W < 0):
        raise ValueError("negative weights (pass signed=True to allow them)")
    deg = W.sum(axis=1)
    L = np.diag(deg) - W
    with np.errstate(divide="ignore"):
        s = np.where(deg > 0, 1.0 / np.sqrt(np.abs(deg)), 0.0)
    Ln = s[:, None] * L * s[None, :]
    IW = np.eye(n) - W
    M = IW.T @ IW
    return LaplacianForms(deg, L, Ln, M, centering_matrix(n))


def _distance_key(d2, labels, mu):
    if labels is None:
        return d2
    labels = np.asarray(labels)
    diff = labels[:, None] != labels[None, :]
    return d2 + mu * diff * d2.max()


def lle_weights(
    X,
    k: int = DEFAULT_K,
    reg: float = DEFAULT_REG,
    labels=None,
    mu: float = DEFAULT_MU,
    d2=None,
) -> WeightGraph:
    """Locally linear reconstruction weights.

    Each sample is written as an affine combination of its ``k`` nearest
    neighbours (self excluded). The local Gram system gets
    ``reg * trace(G) / k`` added to its diagonal when its condition number
    exceeds 1e12. With ``labels`` the neighbour search runs on the modified
    distances ``d2 + mu * [c_i != c_j] * max(d2)``.
    """
    S = sample_rows(X)
    n = S.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < {n}, got {k}")
    if d2 is None:
        d2 = _accel.sq_dists(S)
    nbrs = _accel.knn_select(_distance_key(d2, labels, mu), k, exclude_self=True)
    w, status = _accel.local_weights(S, S, nbrs, reg, COND_MAX)
    bad = np.flatnonzero(status == _accel.DEGENERATE)
    if bad.size:
        raise DegenerateGeometryError(f"weights cannot be normalized for samples {bad.tolist()}")
    W = np.zeros((n, n))
    W[np.repeat(np.arange(n), k), nbrs.ravel()] = w.ravel()
    meta = {
        "kind": "lle",
        "k": k,
        "reg": reg,
        "supervised": labels is not None,
        "mu": mu if labels is not None else None,
        "regularized": int(np.sum(status == _accel.REGULARIZED)),
    }
    return WeightGraph(W, False, meta)


def reconstruction_weights(T, S, k: int, reg: float = DEFAULT_REG):
    """Neighbours and affine weights of each row of ``T`` among the rows of ``S``.

    Used for out-of-sample points, so no sample is excluded.
    """
    T = np.atleast_2d(np.asarray(T, dtype=np.float64))
    S = np.asarray(S, dtype=np.float64)
    if not 1 <= k <= S.shape[0]:
        raise ValueError(f"k must satisfy 1 <= k <= {S.shape[0]}, got {k}")
    key = _accel.cross_sq_dists(T, S)
    nbrs = _accel.knn_select(key, k, exclude_self=False)
    w, status = _accel.local_weights(T, S, nbrs, reg, COND_MAX)
    bad = np.flatnonzero(status == _accel.DEGENERATE)
    if bad.size:
        raise DegenerateGeometryError(f"weights cannot be normalized for points {bad.tolist()}")
    return nbrs, w


def build_affinity(
    X,
    sigma="auto",
    k: int | None = None,
    mode: str = "union",
    threshold: float | None = None,
    labels=None,
    d2=None,
) -> WeightGraph:
    """Gaussian graph, optionally k-NN sparsified and masked by class."""
    if d2 is None:
        d2 = pairwise_sq_dists(X)
    G = gaussian_weights(d2, sigma, threshold)
    if k is not None:
        G = knn_sparsify(G, k, mode, d2=d2)
    if labels is not None:
        G = supervised_weights(G, labels)
    return G


def dump_csv(G, path) -> None:
    """Write the nonzero entries as ``i,j,w`` triplets (0-based indices)."""
    G = _as_graph(G)
    rows, cols = np.nonzero(G.W)
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["i", "j", "w"])
        for i, j in zip(rows, cols):
            out.writerow([int(i), int(j), repr(float(G.W[i, j]))])


def load_csv(path, n: int) -> WeightGraph:
    W = np.zeros((n, n))
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            W[int(row["i"]), int(row["j"])] = float(row["w"])
    return _as_graph(W)
