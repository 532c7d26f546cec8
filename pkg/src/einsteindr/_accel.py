"""Hot per-sample loops, compiled with numba when available.

Every kernel has a pure-numpy twin. The numba versions are used unless
numba is missing or ``EDR_DISABLE_NUMBA`` is set to a non-empty value other
than ``0``. Both variants are importable directly (``numba_impl`` /
``numpy_impl``) for testing and benchmarking.

Sample matrices here are row-major: one sample per row.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

_flag = os.environ.get("EDR_DISABLE_NUMBA", "")
_disabled = _flag not in ("", "0")

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA and not _disabled else "numpy"

# status codes returned by the local weight kernels
OK = 0
REGULARIZED = 1
DEGENERATE = 2


# ---------------------------------------------------------------- numpy twins


def _sq_dists_np(S):
    n = S.shape[0]
    D = np.zeros((n, n))
    for i in range(n - 1):
        diff = S[i + 1:] - S[i]
        row = np.einsum("ij,ij->i", diff, diff)
        D[i, i + 1:] = row
        D[i + 1:, i] = row
    return D


def _cross_sq_dists_np(T, S):
    out = np.empty((T.shape[0], S.shape[0]))
    for i in range(T.shape[0]):
        diff = S - T[i]
        out[i] = np.einsum("ij,ij->i", diff, diff)
    return out


def _knn_select_np(key, k, exclude_self):
    n, m = key.shape
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        row = key[i].copy()
        if exclude_self:
            row[i] = np.inf
        out[i] = np.argsort(row, kind="stable")[:k]
    return out


def _local_weights_np(T, S, nbrs, reg, cond_max):
    nt, k = nbrs.shape
    W = np.zeros((nt, k))
    status = np.zeros(nt, dtype=np.int64)
    ones = np.ones(k)
    for i in range(nt):
        Z = S[nbrs[i]] - T[i]
        G = Z @ Z.T
        if np.linalg.cond(G) > cond_max:
            tr = np.trace(G)
            G = G + (reg * tr / k if tr > 0 else reg) * np.eye(k)
            status[i] = REGULARIZED
        try:
            w = np.linalg.solve(G, ones)
        except np.linalg.LinAlgError:
            status[i] = DEGENERATE
            continue
        s = w.sum()
        if s == 0.0 or not np.isfinite(s):
            status[i] = DEGENERATE
            continue
        W[i] = w / s
    return W, status


def _nearest_np(train, test):
    out = np.empty(test.shape[0], dtype=np.int64)
    for t in range(test.shape[0]):
        diff = train - test[t]
        out[t] = np.argmin(np.einsum("ij,ij->i", diff, diff))
    return out


numpy_impl = SimpleNamespace(
    sq_dists=_sq_dists_np,
    cross_sq_dists=_cross_sq_dists_np,
    knn_select=_knn_select_np,
    local_weights=_local_weights_np,
    nearest=_nearest_np,
)

# ---------------------------------------------------------------- numba kernels

if HAVE_NUMBA:

    @njit(cache=True)
    def _sq_dists_nb(S):
        n, m = S.shape
        D = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                acc = 0.0
                for p in range(m):
                    t = S[i, p] - S[j, p]
                    acc += t * t
                D[i, j] = acc
                D[j, i] = acc
        return D

    @njit(cache=True)
    def _cross_sq_dists_nb(T, S):
        nt, m = T.shape
        ns = S.shape[0]
        out = np.empty((nt, ns))
        for i in range(nt):
            for j in range(ns):
                acc = 0.0
                for p in range(m):
                    t = T[i, p] - S[j, p]
                    acc += t * t
                out[i, j] = acc
        return out

    @njit(cache=True)
    def _knn_select_nb(key, k, exclude_self):
        n = key.shape[0]
        out = np.empty((n, k), dtype=np.int64)
        for i in range(n):
            row = key[i].copy()
            if exclude_self:
                row[i] = np.inf
            order = np.argsort(row, kind="mergesort")
            out[i] = order[:k]
        return out

    @njit(cache=True)
    def _local_weights_nb(T, S, nbrs, reg, cond_max):
        nt, k = nbrs.shape
        m = T.shape[1]
        W = np.zeros((nt, k))
        status = np.zeros(nt, dtype=np.int64)
        ones = np.ones(k)
        Z = np.empty((k, m))
        for i in range(nt):
            for a in range(k):
                for p in range(m):
                    Z[a, p] = S[nbrs[i, a], p] - T[i, p]
            G = Z @ Z.T
            if np.linalg.cond(G) > cond_max:
                tr = np.trace(G)
                shift = reg * tr / k if tr > 0 else reg
                for a in range(k):
                    G[a, a] += shift
                status[i] = REGULARIZED
            try:
                w = np.linalg.solve(G, ones)
            except Exception:  # singular system
                status[i] = DEGENERATE
                continue
            s = w.sum()
            if s == 0.0 or not np.isfinite(s):
                status[i] = DEGENERATE
                continue
            for a in range(k):
                W[i, a] = w[a] / s
        return W, status

    @njit(cache=True)
    def _nearest_nb(train, test):
        nt = test.shape[0]
        n, m = train.shape
        out = np.empty(nt, dtype=np.int64)
        for t in range(nt):
            best = np.inf
            arg = 0
            for j in range(n):
                acc = 0.0
                for p in range(m):
                    diff = train[j, p] - test[t, p]
                    acc += diff * diff
                if acc < best:
                    best = acc
                    arg = j
            out[t] = arg
        return out

    numba_impl = SimpleNamespace(
        sq_dists=_sq_dists_nb,
        cross_sq_dists=_cross_sq_dists_nb,
        knn_select=_knn_select_nb,
        local_weights=_local_weights_nb,
        nearest=_nearest_nb,
    )
else:  # pragma: no cover
    numba_impl = None

_impl = numba_impl if BACKEND == "numba" else numpy_impl


def _rows(A):
    return np.ascontiguousarray(A, dtype=np.float64)


def sq_dists(S):
    """Pairwise squared Euclidean distances between the rows of ``S``."""
    return _impl.sq_dists(_rows(S))


def cross_sq_dists(T, S):
    """Squared distances from each row of ``T`` to each row of ``S``."""
    return _impl.cross_sq_dists(_rows(T), _rows(S))


def knn_select(key, k, exclude_self=True):
    """Indices of the ``k`` smallest entries per row; ties go to the lower index."""
    return _impl.knn_select(_rows(key), int(k), bool(exclude_self))


def local_weights(T, S, nbrs, reg, cond_max=1e12):
    """Affine reconstruction weights of each row of ``T`` from its neighbours in ``S``.

    Returns the ``(len(T), k)`` weights and a per-row status code.
    """
    nbrs = np.ascontiguousarray(nbrs, dtype=np.int64)
    return _impl.local_weights(_rows(T), _rows(S), nbrs, float(reg), float(cond_max))


def nearest(train, test):
    """Index of the closest ``train`` row for every ``test`` row."""
    return _impl.nearest(_rows(train), _rows(test))
