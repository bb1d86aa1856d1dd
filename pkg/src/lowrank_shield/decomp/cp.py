"""CP (Parafac) decomposition fitted by alternating least squares."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, NumericalError
from ..linalg import truncated_svd
from ..tensor import as_tensor, frobenius_norm, khatri_rao, unfold
from .common import DecompOptions, fit_of

RIDGE = 1e-10


@dataclass
class CPModel:
    """Weighted sum of rank-one terms with unit-norm factor columns."""

    weights: np.ndarray
    factors: list[np.ndarray]
    fit_history: list[float] = field(default_factory=list)

    @property
    def rank(self) -> int:
        return int(self.weights.shape[0])

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def fit(self) -> float:
        return self.fit_history[-1] if self.fit_history else float("nan")


def reconstruct_cp(model: CPModel) -> np.ndarray:
    first = model.factors[0] * model.weights
    if len(model.factors) == 1:
        return first.sum(axis=1)
    rest = khatri_rao(*model.factors[1:])
    return (first @ rest.T).reshape(model.shape)


def _normalize(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.sqrt(np.einsum("ij,ij->j", a, a))
    out = np.zeros_like(a)
    nz = norms > 0
    out[:, nz] = a[:, nz] / norms[nz]
    # a dead component keeps a unit column so the normalization invariant holds
    for j in np.flatnonzero(~nz):
        out[0, j] = 1.0
    return out, norms


def _init_factors(t: np.ndarray, rank: int, opts: DecompOptions) -> list[np.ndarray]:
    rng = np.random.default_rng(opts.seed)
    factors = []
    for mode in range(t.ndim):
        n = t.shape[mode]
        a = rng.standard_normal((n, rank))
        if opts.init == "hosvd":
            mat = unfold(t, mode)
            k = min(rank, min(mat.shape))
            a[:, :k] = truncated_svd(mat, k).u
        factors.append(_normalize(a)[0])
    return factors


def _solve_normal(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``x @ gram = rhs`` for symmetric ``gram``; ridge on breakdown."""
    try:
        x = np.linalg.solve(gram, rhs.T).T
        if np.all(np.isfinite(x)):
            return x
    except np.linalg.LinAlgError:
        pass
    ridged = gram + RIDGE * np.eye(gram.shape[0])
    return np.linalg.solve(ridged, rhs.T).T


def cp_als(t, rank: int, opts: DecompOptions | None = None) -> CPModel:
    """Fit a rank-``rank`` CP model by ALS.

    Each sweep solves the Khatri-Rao normal equations mode by mode. A sweep
    that would lower the fit is rejected and iteration stops, so
    ``fit_history`` is nondecreasing.
    """
    opts = opts or DecompOptions()
    t = as_tensor(t)
    if rank < 1:
        raise DomainError(f"CP rank must be >= 1, got {rank}")
    if t.ndim < 2:
        raise DomainError("cp_als needs a tensor with at least two modes")
    norm_t = frobenius_norm(t)
    if norm_t == 0.0:
        factors = [_normalize(np.zeros((n, rank)))[0] for n in t.shape]
        return CPModel(np.zeros(rank), factors, [1.0])

    factors = _init_factors(t, rank, opts)
    weights = np.ones(rank)
    unfoldings = [unfold(t, m) for m in range(t.ndim)]
    history: list[float] = []
    prev_fit = -np.inf

    for _ in range(opts.max_iters):
        new_factors = list(factors)
        new_weights = weights
        for mode in range(t.ndim):
            others = [new_factors[m] for m in range(t.ndim) if m != mode]
            gram = np.ones((rank, rank))
            for a in others:
                gram *= a.T @ a
            mttkrp = unfoldings[mode] @ khatri_rao(*others)
            a = _solve_normal(gram, mttkrp)
            new_factors[mode], new_weights = _normalize(a)
        model = CPModel(new_weights, new_factors)
        fit = fit_of(t, reconstruct_cp(model), norm_t)
        if not np.isfinite(fit):
            raise NumericalError("CP-ALS produced a non-finite fit")
        if fit < prev_fit:
            break
        factors, weights = new_factors, new_weights
        history.append(fit)
        if fit - prev_fit < opts.tol:
            break
        prev_fit = fit

    return CPModel(weights, factors, history)
