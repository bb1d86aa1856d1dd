"""Tensor-Train decomposition by sequential truncated SVDs (TT-SVD)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DomainError
from ..linalg import truncated_svd
from ..tensor import as_tensor


@dataclass
class TTModel:
    """Chain of TT cores.

    ``cores[0]`` is an ``n_1 x r_1`` matrix, ``cores[-1]`` an ``r_{d-1} x n_d``
    matrix and every interior core a 3-mode ``r_{k-1} x n_k x r_k`` array, so
    for four modes::

        X[i, j, k, l] ~ sum G1[i, a] G2[a, j, b] G3[b, k, c] G4[c, l]

    ``discarded`` records the Frobenius norm thrown away at each truncation.
    """

    cores: list[np.ndarray]
    discarded: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if len(self.cores) < 2:
            raise DomainError("a TT model needs at least two cores")
        first, last = self.cores[0], self.cores[-1]
        if first.ndim != 2 or last.ndim != 2:
            raise DomainError("boundary TT cores must be matrices")
        prev = first.shape[1]
        for k, core in enumerate(self.cores[1:-1], start=1):
            if core.ndim != 3 or core.shape[0] != prev:
                raise DomainError(f"core {k} of shape {core.shape} does not chain with rank {prev}")
            prev = core.shape[2]
        if last.shape[0] != prev:
            raise DomainError(f"last core of shape {last.shape} does not chain with rank {prev}")

    @property
    def shape(self) -> tuple[int, ...]:
        mid = tuple(c.shape[1] for c in self.cores[1:-1])
        return (self.cores[0].shape[0],) + mid + (self.cores[-1].shape[1],)

    @property
    def ranks(self) -> tuple[int, ...]:
        return (self.cores[0].shape[1],) + tuple(c.shape[2] for c in self.cores[1:-1])

    @property
    def error_bound(self) -> float:
        """``sqrt(sum eps_k^2)``: the TT-SVD guarantee on the reconstruction error."""
        return float(np.sqrt(sum(e * e for e in self.discarded)))


def max_tt_ranks(shape: Sequence[int]) -> list[int]:
    """Largest rank usable at each TT-SVD step for an untruncated chain."""
    shape = list(shape)
    out = []
    left = 1
    for k in range(len(shape) - 1):
        left *= shape[k]
        right = int(np.prod(shape[k + 1:]))
        out.append(min(left, right))
    return out


def clamp_tt_ranks(shape: Sequence[int], ranks: Sequence[int]) -> list[int]:
    """Clamp requested ranks so every TT-SVD step is feasible.

    Step ``k`` truncates an ``(r_{k-1} n_k) x (n_{k+1} ... n_d)`` matrix, so
    ``r_k <= min(r_{k-1} n_k, n_{k+1} ... n_d)`` with ``r_{k-1}`` the rank
    actually used at the previous step.
    """
    shape = list(shape)
    out = []
    prev = 1
    for k, r in enumerate(ranks):
        right = int(np.prod(shape[k + 1:]))
        r = max(1, min(int(r), prev * shape[k], right))
        out.append(r)
        prev = r
    return out


def tt_svd(t, ranks: Sequence[int]) -> TTModel:
    """Decompose ``t`` into a TT chain with the given ranks.

    The reconstruction error satisfies
    ``||t - reconstruct_tt(model)||_F <= model.error_bound``.

    Raises
    ------
    DomainError
        Wrong number of ranks, or a rank infeasible at some step.
    """
    t = as_tensor(t)
    d = t.ndim
    if d < 2:
        raise DomainError("tt_svd needs a tensor with at least two modes")
    ranks = [int(r) for r in ranks]
    if len(ranks) != d - 1:
        raise DomainError(f"a {d}-mode tensor needs {d - 1} TT ranks, got {len(ranks)}")

    cores = []
    discarded = []
    prev = 1
    rest = t
    for k in range(d - 1):
        mat = rest.reshape(prev * t.shape[k], -1)
        limit = min(mat.shape)
        r = ranks[k]
        if not 1 <= r <= limit:
            raise DomainError(
                f"TT rank r{k + 1}={r} is infeasible at step {k + 1}: "
                f"the {mat.shape[0]}x{mat.shape[1]} unfolding allows 1..{limit}"
            )
        res = truncated_svd(mat, r)
        if k == 0:
            cores.append(res.u)
        else:
            cores.append(res.u.reshape(prev, t.shape[k], r))
        discarded.append(res.discarded)
        rest = res.s[:, None] * res.vt
        prev = r
    cores.append(rest.reshape(prev, t.shape[-1]))
    return TTModel(cores, tuple(discarded))


def reconstruct_tt(model: TTModel) -> np.ndarray:
    """Contract the chain left to right with matrix products."""
    out = model.cores[0]
    for core in model.cores[1:-1]:
        r, n, r2 = core.shape
        out = (out @ core.reshape(r, n * r2)).reshape(-1, r2)
    out = out @ model.cores[-1]
    return out.reshape(model.shape)
