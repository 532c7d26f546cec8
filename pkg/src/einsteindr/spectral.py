"""Dense symmetric eigensolvers, E-SVD and eigenpair selection."""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np
import scipy.linalg

from .exceptions import DefinitenessError, ShapeError
from .tensor import as_tensor, fold, unfold

RIDGE = 1e-10
SYM_TOL = 1e-8


@dataclass(frozen=True)
class EigResult:
    """Eigenvalues in ascending order with matching eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class SelectSpec:
    d: int
    side: str = "smallest"
    skip_first: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.side not in ("smallest", "largest"):
            raise ValueError(f"side must be 'smallest' or 'largest', got {self.side!r}")


def fix_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive."""
    V = np.array(V, dtype=np.float64, copy=True)
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _symmetric(A: np.ndarray, name: str = "A") -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {A.shape}")
    scale = np.max(np.abs(A)) if A.size else 0.0
    if scale > 0 and np.max(np.abs(A - A.T)) > SYM_TOL * scale:
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (A + A.T)


def sym_eig(A) -> EigResult:
    """Full spectrum of a symmetric matrix, ascending."""
    A = _symmetric(A)
    values, vectors = scipy.linalg.eigh(A)
    return EigResult(values, fix_signs(vectors))


def gen_sym_eig(A, B, ridge: float = RIDGE) -> EigResult:
    """Solve ``A v = lambda B v`` for symmetric ``A`` and symmetric positive definite ``B``.

    ``B`` is shifted by ``ridge * trace(B)/n`` when its smallest eigenvalue
    falls below that level. The problem is reduced through the Cholesky factor
    ``B = R^T R`` to the standard one on ``R^{-T} A R^{-1}``. The returned
    vectors are B-orthonormal.
    """
    A = _symmetric(A, "A")
    B = _symmetric(B, "B")
    if A.shape != B.shape:
        raise ShapeError(f"A is {A.shape}, B is {B.shape}")
    n = B.shape[0]
    level = ridge * np.trace(B) / n
    if scipy.linalg.eigvalsh(B, subset_by_index=[0, 0])[0] < level:
        B = B + level * np.eye(n)
    try:
        R = scipy.linalg.cholesky(B, lower=False)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError("right-hand matrix is not positive definite") from exc
    # C = R^{-T} A R^{-1}
    tmp = scipy.linalg.solve_triangular(R, A, trans="T")
    C = scipy.linalg.solve_triangular(R, tmp.T, trans="T").T
    inner = sym_eig(0.5 * (C + C.T))
    V = scipy.linalg.solve_triangular(R, inner.vectors)
    return EigResult(inner.values, fix_signs(V))


def esvd(X, split: int, full: bool = True):
    """Einstein SVD of ``X`` with the first ``split`` modes as the row group.

    Returns ``(U, S, V)`` where ``U`` and ``V`` are folded singular tensors of
    shapes ``I_row + (k,)`` and ``I_col + (k,)``. With ``full=True``
    ``k`` is the full row/column size and both tensors are unitary; otherwise
    the thin factors are returned.
    """
    X = as_tensor(X)
    A = unfold(X, split)
    U, s, Vt = np.linalg.svd(A, full_matrices=full)
    U = fix_signs(U)
    # keep U S V^T intact after the sign flips on U
    k = len(s)
    V = Vt.T.copy()
    V[:, :k] *= np.sign(np.sum(U[:, :k] * (A @ V[:, :k]), axis=0) + (s == 0))
    row = X.shape[:split]
    col = X.shape[split:]
    U_t = fold(U, row + (U.shape[1],), split)
    V_t = fold(V, col + (V.shape[1],), len(col))
    return U_t, s, V_t


def select(res: EigResult, spec: SelectSpec) -> EigResult:
    """Pick ``spec.d`` eigenpairs from one end of an ascending spectrum."""
    need = spec.d + (1 if spec.skip_first else 0)
    if need > len(res.values):
        raise ValueError(f"need {need} eigenpairs, only {len(res.values)} available")
    start = 1 if spec.skip_first else 0
    if spec.side == "smallest":
        idx = np.arange(start, start + spec.d)
    else:
        n = len(res.values)
        idx = np.arange(n - 1 - start, n - 1 - start - spec.d, -1)
    return EigResult(res.values[idx], res.vectors[:, idx])


def range_basis(X, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the column space of ``X``.

    Singular directions with ``sigma <= tol * sigma_max`` are dropped; a zero
    matrix gives an empty ``(m, 0)`` basis.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        return np.zeros((X.shape[0], 0))
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    if s[0] == 0:
        return np.zeros((X.shape[0], 0))
    keep = s > tol * s[0]
    return fix_signs(U[:, keep])


def subspace_distance(P1, P2) -> float:
    """``||Q1 Q1^T - Q2 Q2^T||_F`` for orthonormalized column spans of ``P1``, ``P2``."""
    Q1 = _orth(P1)
    Q2 = _orth(P2)
    if Q1.shape[0] != Q2.shape[0]:
        raise ShapeError("bases live in spaces of different dimension")
    # ||P1 - P2||_F^2 = ||(I - P1) Q2||_F^2 + ||(I - P2) Q1||_F^2; residual
    # form avoids the cancellation in r1 + r2 - 2 ||Q1^T Q2||_F^2
    R2 = Q2 - Q1 @ (Q1.T @ Q2)
    R1 = Q1 - Q2 @ (Q2.T @ Q1)
    return float(np.sqrt(np.sum(R1**2) + np.sum(R2**2)))


def _orth(P) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    P = P.reshape(-1, P.shape[-1], order="F") if P.ndim > 2 else P
    Q, _ = np.linalg.qr(P)
    return Q




def principal_basis(X, r: int, tol: float = 1e-10) -> np.ndarray:
    """Top ``r`` left singular vectors of the row-centered matrix ``X``.

    Columns are samples. Directions below ``tol * sigma_max`` are dropped, so
    fewer than ``r`` columns come back for low-rank data.
    """
    X = np.asarray(X, dtype=np.float64)
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    Xc = X - X.mean(axis=1, keepdims=True)
    return range_basis(Xc, tol)[:, :r]


def restriction_basis(X, pca_dim: int | None = None, tol: float = 1e-10) -> np.ndarray:
    """Basis used to restrict a feature-space eigenproblem.

    ``pca_dim=None`` gives the column space of ``X``; an integer gives the
    leading principal subspace of that dimension.
    """
    if pca_dim is None:
        return range_basis(X, tol)
    return principal_basis(X, int(pca_dim), tol)


__all__ = [
    "EigResult",
    "SelectSpec",
    "sym_eig",
    "gen_sym_eig",
    "esvd",
    "select",
    "range_basis",
    "subspace_distance",
    "fix_signs",
    "principal_basis",
    "restriction_basis",
]
