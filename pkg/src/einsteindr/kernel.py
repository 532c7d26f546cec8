"""Kernel variants working from a Gram matrix of the samples.

Kernels act on sample slices through their Frobenius inner products or
distances, so the order of the data tensor does not matter once ``K`` is
built. These methods return training embeddings ``Y`` (``d x n``) only;
there is no out-of-sample map.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _accel, spectral
from .exceptions import DataFormatError, DefinitenessError, RankDeficiencyError, ShapeError
from .graph import WeightGraph, auto_sigma, laplacian_forms, sample_rows
from .spectral import SelectSpec

KINDS = ("gaussian", "polynomial", "linear", "laplacian", "sigmoid")
PSD_TOL = 1e-8


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice and parameters.

    gaussian: ``exp(-||x-y||^2 / sigma^2)``; laplacian: ``exp(-||x-y|| / sigma)``;
    polynomial: ``(slope <x,y> + offset)^degree``; sigmoid:
    ``tanh(slope <x,y> + offset)``; linear: ``<x,y>``. ``sigma="auto"``
    takes half the median pairwise distance.
    """

    kind: str = "gaussian"
    sigma: float | str = "auto"
    degree: int = 2
    offset: float = 1.0
    slope: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel {self.kind!r}; choose from {KINDS}")
        if not isinstance(self.sigma, str) and not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if isinstance(self.sigma, str) and self.sigma != "auto":
            raise ValueError(f"unknown sigma rule {self.sigma!r}")
        if self.kind == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise ValueError(f"degree must be a positive integer, got {self.degree}")


@dataclass
class GramMatrix:
    K: np.ndarray
    centered: bool = False

    @property
    def n(self):
        return self.K.shape[0]


def gram(X, spec: KernelSpec = KernelSpec()) -> GramMatrix:
    """Gram matrix of the frontal slices of ``X``."""
    S = sample_rows(X)
    if spec.kind in ("gaussian", "laplacian"):
        d2 = _accel.sq_dists(S)
        sigma = auto_sigma(d2) if spec.sigma == "auto" else float(spec.sigma)
        if not sigma > 0:
            raise ValueError("sigma resolved to zero (all samples coincide)")
        if spec.kind == "gaussian":
            K = np.exp(-d2 / sigma**2)
        else:
            K = np.exp(-np.sqrt(d2) / sigma)
    else:
        ip = S @ S.T
        if spec.kind == "linear":
            K = ip
        elif spec.kind == "polynomial":
            K = (spec.slope * ip + spec.offset) ** int(spec.degree)
        else:
            K = np.tanh(spec.slope * ip + spec.offset)
    return GramMatrix(0.5 * (K + K.T), False)


def _K(K) -> np.ndarray:
    K = K.K if isinstance(K, GramMatrix) else np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ShapeError(f"Gram matrix must be square, got {K.shape}")
    return K


def center_gram(K) -> GramMatrix:
    """``J K J`` with ``J = I - 11^T / n``."""
    K = _K(K)
    Kc = K - K.mean(axis=0, keepdims=True)
    Kc = Kc - Kc.mean(axis=1, keepdims=True)
    return GramMatrix(0.5 * (Kc + Kc.T), True)


def fit_kpca(K, d: int, scaling: str = "sqrt") -> np.ndarray:
    """Kernel PCA embedding from the ``d`` leading eigenpairs of the centered Gram matrix.

    ``scaling="sqrt"`` multiplies each eigenvector by ``sqrt(lambda)`` so that
    ``Y^T Y`` is the best rank-``d`` approximation of the centered Gram
    matrix. ``"none"`` returns the unit eigenvectors and ``"inverse"``
    divides by ``sqrt(lambda)``.
    """
    G = K if isinstance(K, GramMatrix) and K.centered else center_gram(K)
    res = spectral.sym_eig(G.K)
    sel = spectral.select(res, SelectSpec(d, "largest"))
    # relative cut: wide Gaussian kernels have legitimately tiny spectra
    floor = PSD_TOL * max(res.values[-1], 0.0)
    if np.any(sel.values <= floor) or res.values[-1] <= 0:
        npos = int(np.sum(res.values > floor))
        raise RankDeficiencyError(f"centered Gram matrix has {npos} positive eigenvalues, d={d}")
    V = sel.vectors
    if scaling == "sqrt":
        return (V * np.sqrt(sel.values)).T
    if scaling == "inverse":
        return (V / np.sqrt(sel.values)).T
    if scaling == "none":
        return V.T.copy()
    raise ValueError(f"unknown scaling {scaling!r}")


def _graph(W):
    return W.W if isinstance(W, WeightGraph) else np.asarray(W, dtype=np.float64)


def fit_klpp(K, W, d: int, skip_first: bool = False) -> np.ndarray:
    """Kernel LPP: rows of ``Y`` solve ``L z = lambda D z`` (smallest ``d``)."""
    Km = _K(K)
    Wm = _graph(W)
    if Wm.shape != Km.shape:
        raise ShapeError("graph and Gram matrix differ in size")
    if np.linalg.cond(Km) > 1e12:
        warnings.warn("Gram matrix is close to singular", RuntimeWarning, stacklevel=2)
    lap = laplacian_forms(Wm)
    if np.any(lap.D <= 0):
        raise DefinitenessError("degree matrix is singular (isolated vertex)")
    if not np.any(lap.L):
        raise RankDeficiencyError("graph Laplacian is zero (self-loops only)")
    res = spectral.gen_sym_eig(lap.L, np.diag(lap.D))
    sel = spectral.select(res, SelectSpec(d, "smallest", skip_first))
    return sel.vectors.T.copy()


def sqrt_psd(K) -> np.ndarray:
    """Symmetric square root with negative eigenvalues clamped to zero."""
    Km = _K(K)
    res = spectral.sym_eig(Km)
    scale = max(np.abs(res.values).max(), 1.0)
    if res.values[0] < -PSD_TOL * scale:
        raise DefinitenessError(f"Gram matrix is indefinite (min eigenvalue {res.values[0]:.3g})")
    lam = np.clip(res.values, 0.0, None)
    return (res.vectors * np.sqrt(lam)) @ res.vectors.T


def konpp_operator(K, W) -> tuple[np.ndarray, np.ndarray]:
    """``(S, S M S)`` with ``S = K^{1/2}`` and ``M = (I - W)^T (I - W)``."""
    Km = _K(K)
    Wm = _graph(W)
    if Wm.shape != Km.shape:
        raise ShapeError("graph and Gram matrix differ in size")
    IW = np.eye(Km.shape[0]) - Wm
    S = sqrt_psd(Km)
    A = S @ (IW.T @ IW) @ S
    return S, 0.5 * (A + A.T)


def fit_konpp(K, W, d: int, skip_first: bool = False, return_eig: bool = False):
    """Kernel ONPP: smallest eigenvectors ``z`` of ``K M``.

    Solved on the congruent symmetric matrix ``S M S`` (``S = K^{1/2}``);
    eigenvectors ``u`` map back as ``z = S u`` and are normalized to unit
    length. Rows of the returned ``Y`` are the ``z^T``.
    """
    S, A = konpp_operator(K, W)
    sel = spectral.select(spectral.sym_eig(A), SelectSpec(d, "smallest", skip_first))
    Z = S @ sel.vectors
    norms = np.linalg.norm(Z, axis=0)
    if np.any(norms <= 1e-12):
        raise RankDeficiencyError("an eigenvector lies in the null space of K")
    Y = spectral.fix_signs(Z / norms).T
    if return_eig:
        return Y, sel
    return Y


def fit_kolpp(K, d: int, skip_first: bool = False) -> np.ndarray:
    """Kernel OLPP: rows of ``Y`` are the smallest ``d`` eigenvectors of ``K``."""
    res = spectral.sym_eig(_K(K))
    return spectral.select(res, SelectSpec(d, "smallest", skip_first)).vectors.T.copy()


def save_gram_csv(K, path) -> None:
    """Dense CSV: first line holds ``n``, then ``n`` rows of ``n`` values."""
    Km = _K(K)
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow([Km.shape[0]])
        for row in Km:
            out.writerow([repr(float(v)) for v in row])


def load_gram_csv(path) -> GramMatrix:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    try:
        n = int(rows[0][0])
        K = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    except (IndexError, ValueError) as exc:
        raise DataFormatError(f"{path}: malformed Gram CSV") from exc
    if K.shape != (n, n):
        raise DataFormatError(f"{path}: header says n={n}, body is {K.shape}")
    if not np.array_equal(K, K.T):
        raise DataFormatError(f"{path}: Gram matrix is not symmetric")
    return GramMatrix(K, False)
