"""Dense tensor index algebra.

Tensors are plain ``float64`` :class:`numpy.ndarray` objects in C order (last
index fastest). :func:`as_tensor` is the validating constructor: it converts
to ``float64``, checks every mode is non-empty and rejects NaN/Inf.

Unfolding convention
--------------------
``unfold(t, n)`` has ``t.shape[n]`` rows. Column ``j`` enumerates the remaining
modes *in their original order with the last one varying fastest*, i.e. for a
3-mode tensor of shape ``(I, J, K)``::

    unfold(t, 0)[i, j * K + k] == t[i, j, k]
    unfold(t, 1)[j, i * K + k] == t[i, j, k]
    unfold(t, 2)[k, i * J + j] == t[i, j, k]

With this ordering the mode-``n`` unfolding of a CP tensor factors as
``A_n @ khatri_rao(A_0, ..., A_{n-1}, A_{n+1}, ...).T`` with the factors taken
in increasing mode order.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "as_tensor",
    "unfold",
    "fold",
    "mode_n_product",
    "multi_mode_product",
    "khatri_rao",
    "frobenius_norm",
]


def as_tensor(data, shape: Sequence[int] | None = None) -> np.ndarray:
    """Return ``data`` as a validated float64 tensor.

    ``shape`` may be given to reshape a flat row-major buffer.
    """
    arr = np.asarray(data, dtype=np.float64)
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        if arr.size != int(np.prod(shape, dtype=np.int64)):
            raise DomainError(f"{arr.size} values cannot fill shape {shape}")
        arr = arr.reshape(shape)
    if arr.ndim < 1:
        raise DomainError("a tensor needs at least one mode")
    if any(s < 1 for s in arr.shape):
        raise DomainError(f"every mode size must be >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("tensor contains NaN or Inf")
    return arr


def _check_mode(ndim: int, mode: int) -> int:
    if not 0 <= mode < ndim:
        raise DomainError(f"mode {mode} out of range for a {ndim}-mode tensor")
    return mode


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization (see module docstring for column order)."""
    t = np.asarray(t)
    _check_mode(t.ndim, mode)
    return np.moveaxis(t, mode, 0).reshape(t.shape[mode], -1)


def fold(m: np.ndarray, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    m = np.asarray(m)
    shape = tuple(int(s) for s in shape)
    _check_mode(len(shape), mode)
    if m.ndim != 2:
        raise DomainError(f"fold expects a matrix, got {m.ndim} dims")
    rest = shape[:mode] + shape[mode + 1:]
    ncols = int(np.prod(rest, dtype=np.int64))
    if m.shape != (shape[mode], ncols):
        raise DomainError(
            f"matrix of shape {m.shape} does not unfold shape {shape} along mode {mode}"
        )
    return np.moveaxis(m.reshape((shape[mode],) + rest), 0, mode)


def mode_n_product(t: np.ndarray, a: np.ndarray, mode: int) -> np.ndarray:
    """Multiply tensor ``t`` by matrix ``a`` along ``mode``.

    The result replaces ``t.shape[mode]`` by ``a.shape[0]``.
    """
    t = np.asarray(t)
    a = np.asarray(a)
    _check_mode(t.ndim, mode)
    if a.ndim != 2 or a.shape[1] != t.shape[mode]:
        raise DomainError(
            f"matrix of shape {a.shape} cannot act on mode {mode} of size {t.shape[mode]}"
        )
    # tensordot puts the new axis last; move it back into place
    out = np.tensordot(t, a, axes=([mode], [1]))
    return np.moveaxis(out, -1, mode)


def multi_mode_product(
    t: np.ndarray, mats: Sequence[np.ndarray | None], transpose: bool = False
) -> np.ndarray:
    """Apply one matrix per mode; ``None`` entries skip that mode."""
    out = t
    for mode, a in enumerate(mats):
        if a is None:
            continue
        out = mode_n_product(out, a.T if transpose else a, mode)
    return out


def khatri_rao(*mats: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product.

    ``khatri_rao(a, b)[:, r] == np.kron(a[:, r], b[:, r])``; more than two
    arguments chain left to right.
    """
    if not mats:
        raise DomainError("khatri_rao needs at least one matrix")
    mats = [np.asarray(m, dtype=np.float64) for m in mats]
    ncols = mats[0].shape[1]
    for m in mats:
        if m.ndim != 2 or m.shape[1] != ncols:
            raise DomainError("khatri_rao operands must all have the same number of columns")

    def pair(a, b):
        return (a[:, None, :] * b[None, :, :]).reshape(-1, ncols)

    return reduce(pair, mats)


def frobenius_norm(t: np.ndarray) -> float:
    """Square root of the sum of squared entries."""
    t = np.asarray(t, dtype=np.float64)
    return float(np.sqrt(np.vdot(t.ravel(), t.ravel())))
