"""Dense SVD by one-sided (Hestenes) Jacobi rotations.

The sweep kernel is compiled with Cython when the extension is available and
falls back to a vectorized NumPy implementation otherwise. Set
``LOWRANK_SHIELD_PURE_PYTHON=1`` before import to force the fallback.
"""

from __future__ import annotations

import os
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import DomainError, NumericalError

__all__ = ["SvdResult", "svd", "truncated_svd", "BACKEND", "round_robin_schedule"]

MAX_SWEEPS = 60
ROTATION_TOL = 1e-12

if os.environ.get("LOWRANK_SHIELD_PURE_PYTHON"):
    from ._jacobi_py import jacobi_sweeps as _sweeps

    BACKEND = "python"
else:
    try:
        from ._jacobi import jacobi_sweeps as _sweeps

        BACKEND = "cython"
    except ImportError:
        from ._jacobi_py import jacobi_sweeps as _sweeps

        BACKEND = "python"


class SvdResult(NamedTuple):
    """Thin SVD ``u @ diag(s) @ vt``.

    ``discarded`` is the Frobenius norm of the dropped tail when the result
    comes from :func:`truncated_svd` (0 for a full decomposition).
    """

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray
    discarded: float = 0.0

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.vt


@lru_cache(maxsize=64)
def round_robin_schedule(n: int) -> np.ndarray:
    """Circle-method tournament: ``n - 1`` (or ``n``) rounds of disjoint pairs.

    Returns an ``(rounds, pairs, 2)`` intp array; ``-1`` marks a bye.
    """
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < 0 or b < 0:
                pairs.append((-1, -1))
            else:
                pairs.append((min(a, b), max(a, b)))
        rounds.append(pairs)
        players = [players[0], players[-1]] + players[1:-1]
    if not rounds:
        return np.full((1, 1, 2), -1, dtype=np.intp)
    sched = np.array(rounds, dtype=np.intp)
    sched.setflags(write=False)
    return sched


def _complete_basis(U: np.ndarray, good: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Replace the columns of ``U`` not flagged ``good`` by an orthonormal completion."""
    m, k = U.shape
    out = U.copy()
    basis = [out[:, j] for j in range(k) if good[j]]
    eye_iter = iter(range(m))
    for j in range(k):
        if good[j]:
            continue
        trials = []
        cn = np.linalg.norm(candidates[:, j])
        if cn > 0:
            trials.append(candidates[:, j] / cn)
        found = None
        while found is None:
            if trials:
                v = trials.pop()
            else:
                v = np.zeros(m)
                v[next(eye_iter)] = 1.0
            for _ in range(2):
                for b in basis:
                    v = v - np.dot(b, v) * b
            nv = np.linalg.norm(v)
            if nv > 0.5:
                found = v / nv
        basis.append(found)
        out[:, j] = found
    return out


def svd(m) -> SvdResult:
    """Thin SVD of a real matrix.

    Singular values come back nonincreasing (ties keep input order), and each
    singular pair is signed so the largest-magnitude entry of the left vector
    is positive.

    Raises
    ------
    DomainError
        Empty or non-finite input.
    NumericalError
        No convergence within 60 sweeps; carries the last relative residual.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise DomainError(f"svd needs a nonempty matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("svd input contains NaN or Inf")

    transposed = a.shape[0] < a.shape[1]
    work = a.T if transposed else a
    rows, n = work.shape

    # rows of Y are the columns being orthogonalized
    Y = np.array(work.T, dtype=np.float64, order="C", copy=True)
    V = np.eye(n)
    fro = float(np.sqrt(np.vdot(a.ravel(), a.ravel())))
    eps = np.finfo(np.float64).eps
    floor = (eps * fro) ** 2

    sweeps, converged, resid = _sweeps(
        Y, V, round_robin_schedule(n), ROTATION_TOL, floor, MAX_SWEEPS
    )
    if not converged:
        raise NumericalError(f"Jacobi SVD did not converge in {sweeps} sweeps", residual=resid)

    sig = np.sqrt(np.einsum("ij,ij->i", Y, Y))
    order = np.argsort(-sig, kind="stable")
    sig = sig[order]
    Y = Y[order]
    V = V[order]

    null_tol = max(rows, n) * eps * (sig[0] if sig.size else 0.0)
    good = sig > null_tol
    with np.errstate(invalid="ignore", divide="ignore"):
        U = np.where(good[None, :], (Y / np.where(good, sig, 1.0)[:, None]).T, 0.0)
    if not good.all():
        U = _complete_basis(U, good, Y.T)
    Vm = V.T  # columns are right singular vectors of `work`

    if transposed:
        u, vt = Vm, U.T
    else:
        u, vt = U, Vm.T

    u = np.ascontiguousarray(u)
    vt = np.ascontiguousarray(vt)
    idx = np.argmax(np.abs(u), axis=0)
    flip = u[idx, np.arange(u.shape[1])] < 0
    u[:, flip] *= -1.0
    vt[flip, :] *= -1.0
    return SvdResult(u, sig, vt)


def truncated_svd(m, rank: int) -> SvdResult:
    """Leading ``rank`` singular triplets; ``discarded`` holds the tail norm."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise DomainError(f"truncated_svd needs a matrix, got shape {a.shape}")
    kmax = min(a.shape)
    if not 1 <= rank <= kmax:
        raise DomainError(f"rank {rank} outside [1, {kmax}] for a {a.shape[0]}x{a.shape[1]} matrix")
    full = svd(a)
    tail = full.s[rank:]
    return SvdResult(
        full.u[:, :rank].copy(),
        full.s[:rank].copy(),
        full.vt[:rank].copy(),
        float(np.sqrt(np.sum(tail * tail))),
    )
