"""Dense tensors and the Einstein-product algebra.

Tensors are plain ``numpy.ndarray`` objects of dtype float64. Storage is
column-major ("first index fastest"), so the flat position of an element is
``ivec(i, shape) - 1`` and every unfolding is a reshape of the same buffer.
Functions here accept any array and return Fortran-ordered float64 arrays.

Indices in the public helpers (``ivec``, ``m_mode_product``,
``frontal_slice``) are 1-based, matching the usual mathematical notation.
"""

from __future__ import annotations

import struct
from math import prod
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import DataFormatError, ShapeError

ETEN_MAGIC = b"ETEN"


def as_tensor(x) -> np.ndarray:
    """Return ``x`` as a Fortran-ordered float64 array (no copy if already one)."""
    return np.asfortranarray(np.asarray(x, dtype=np.float64))


def _check_shape(shape: Sequence[int]) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if any(s < 1 for s in shape):
        raise ShapeError(f"all extents must be >= 1, got {shape}")
    return shape


def ivec(index: Sequence[int], shape: Sequence[int]) -> int:
    """Linear position (1-based) of a 1-based multi-index, first index fastest.

    >>> ivec((2, 1), (3, 4))
    2
    >>> ivec((3, 4), (3, 4))
    12
    """
    shape = _check_shape(shape)
    if len(index) != len(shape):
        raise ShapeError(f"index has {len(index)} entries, shape has {len(shape)}")
    pos = 0
    stride = 1
    for i, extent in zip(index, shape):
        if not 1 <= i <= extent:
            raise IndexError(f"index {tuple(index)} out of range for shape {shape}")
        pos += (i - 1) * stride
        stride *= extent
    return pos + 1


def _matricize(X: np.ndarray, j: int) -> np.ndarray:
    # j may be 0 or X.ndim here; public unfold() restricts it.
    rows = prod(X.shape[:j])
    cols = prod(X.shape[j:])
    return np.reshape(X, (rows, cols), order="F")


def unfold(X, j: int) -> np.ndarray:
    """Matricize ``X`` with the first ``j`` modes as rows and the rest as columns."""
    X = as_tensor(X)
    if not 1 <= j < X.ndim:
        raise ValueError(f"split point must satisfy 1 <= j < {X.ndim}, got {j}")
    return _matricize(X, j)


def fold(A, shape: Sequence[int], j: int) -> np.ndarray:
    """Inverse of :func:`unfold` for a tensor of the given ``shape``."""
    shape = _check_shape(shape)
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ShapeError("fold expects a matrix")
    if not 1 <= j < len(shape):
        raise ValueError(f"split point must satisfy 1 <= j < {len(shape)}, got {j}")
    expected = (prod(shape[:j]), prod(shape[j:]))
    if A.shape != expected:
        raise ShapeError(f"matrix is {A.shape}, expected {expected} for shape {shape}")
    return np.reshape(np.asfortranarray(A), shape, order="F")


def einstein_product(A, B, N: int) -> np.ndarray:
    """Contract the last ``N`` modes of ``A`` with the first ``N`` modes of ``B``.

    Evaluated as unfold, matrix multiply, fold. Contracting every mode of
    both operands yields a 0-d array holding their inner product.
    """
    A = as_tensor(A)
    B = as_tensor(B)
    if N < 0 or N > A.ndim or N > B.ndim:
        raise ShapeError(f"cannot contract {N} modes of orders {A.ndim} and {B.ndim}")
    if A.shape[A.ndim - N:] != B.shape[:N]:
        raise ShapeError(
            f"contracted extents differ: {A.shape[A.ndim - N:]} vs {B.shape[:N]}"
        )
    out_shape = A.shape[: A.ndim - N] + B.shape[N:]
    C = _matricize(A, A.ndim - N) @ _matricize(B, N)
    return np.reshape(np.asfortranarray(C), out_shape, order="F")


def m_mode_product(X, U, m: int) -> np.ndarray:
    """Multiply ``X`` along mode ``m`` (1-based) by the matrix ``U``."""
    X = as_tensor(X)
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2:
        raise ShapeError("U must be a matrix")
    if not 1 <= m <= X.ndim:
        raise ValueError(f"mode {m} out of range for order {X.ndim}")
    if U.shape[1] != X.shape[m - 1]:
        raise ShapeError(f"U has {U.shape[1]} columns, mode {m} has extent {X.shape[m - 1]}")
    Y = np.tensordot(U, X, axes=(1, m - 1))
    return as_tensor(np.moveaxis(Y, 0, m - 1))


def block_transpose(A, N: int) -> np.ndarray:
    """Swap the leading ``N`` modes with the trailing ones."""
    A = as_tensor(A)
    if not 0 < N < A.ndim:
        raise ValueError(f"row-group size must satisfy 0 < N < {A.ndim}, got {N}")
    axes = list(range(N, A.ndim)) + list(range(N))
    return as_tensor(np.transpose(A, axes))


def inner(X, Y) -> float:
    """Sum of elementwise products of two equally shaped tensors."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape != Y.shape:
        raise ShapeError(f"shapes differ: {X.shape} vs {Y.shape}")
    return float(np.dot(X.ravel(order="F"), Y.ravel(order="F")))


def frob_norm(X) -> float:
    return float(np.sqrt(inner(X, X)))


def trace(A) -> float:
    """Trace of a square even-order tensor (sum of its diagonal entries)."""
    A = as_tensor(A)
    if A.ndim % 2 or A.ndim == 0:
        raise ShapeError(f"trace needs an even-order tensor, got order {A.ndim}")
    N = A.ndim // 2
    if A.shape[:N] != A.shape[N:]:
        raise ShapeError(f"tensor of shape {A.shape} is not square")
    return float(np.trace(_matricize(A, N)))


def identity_tensor(shape: Sequence[int]) -> np.ndarray:
    shape = _check_shape(shape)
    n = prod(shape)
    return fold(np.eye(n), shape + shape, len(shape))


def diag_tensor(values) -> np.ndarray:
    """Square diagonal tensor whose diagonal holds the entries of ``values``."""
    values = as_tensor(values)
    shape = values.shape
    return fold(np.diag(values.ravel(order="F")), shape + shape, len(shape))


def frontal_slice(X, i: int) -> np.ndarray:
    """``X[..., i]`` with a 1-based sample index ``i``."""
    X = as_tensor(X)
    if not 1 <= i <= X.shape[-1]:
        raise IndexError(f"slice {i} out of range 1..{X.shape[-1]}")
    return as_tensor(X[..., i - 1])


def write_eten(path, X) -> None:
    """Write ``X`` in the ETEN interchange format.

    Layout: ``b"ETEN"``, little-endian u32 order, one u32 per extent, then
    the float64 payload in column-major order.
    """
    X = as_tensor(X)
    header = ETEN_MAGIC + struct.pack(f"<I{X.ndim}I", X.ndim, *X.shape)
    payload = X.ravel(order="F").astype("<f8", copy=False).tobytes()
    Path(path).write_bytes(header + payload)


def read_eten(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != ETEN_MAGIC:
        raise DataFormatError(f"{path}: bad magic {raw[:4]!r}")
    if len(raw) < 8:
        raise DataFormatError(f"{path}: truncated header")
    (order,) = struct.unpack_from("<I", raw, 4)
    offset = 8 + 4 * order
    if len(raw) < offset:
        raise DataFormatError(f"{path}: truncated header")
    shape = struct.unpack_from(f"<{order}I", raw, 8)
    count = prod(shape)
    if len(raw) != offset + 8 * count:
        raise DataFormatError(
            f"{path}: payload has {len(raw) - offset} bytes, expected {8 * count}"
        )
    flat = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
    return np.reshape(flat.astype(np.float64), shape, order="F")
