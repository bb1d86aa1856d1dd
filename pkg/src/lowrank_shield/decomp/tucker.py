"""Tucker decomposition: truncated HOSVD refined by HOOI."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DomainError, NumericalError
from ..linalg import truncated_svd
from ..tensor import as_tensor, frobenius_norm, multi_mode_product, unfold
from .common import DecompOptions, fit_of


@dataclass
class TuckerModel:
    """Core tensor and one orthonormal factor per mode.

    The approximation is ``core x_1 A_1 x_2 A_2 ... x_N A_N``.
    """

    core: np.ndarray
    factors: list[np.ndarray]
    fit_history: list[float] = field(default_factory=list)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(self.core.shape)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def fit(self) -> float:
        return self.fit_history[-1] if self.fit_history else float("nan")


def reconstruct_tucker(model: TuckerModel) -> np.ndarray:
    return multi_mode_product(model.core, model.factors)


def validate_tucker_ranks(shape: Sequence[int], ranks: Sequence[int]) -> list[int]:
    """Check ``1 <= R_m <= n_m`` and ``R_m <= prod(R_other)`` for every mode."""
    ranks = [int(r) for r in ranks]
    if len(ranks) != len(shape):
        raise DomainError(f"a {len(shape)}-mode tensor needs {len(shape)} Tucker ranks, got {len(ranks)}")
    total = int(np.prod(ranks))
    for m, (r, n) in enumerate(zip(ranks, shape)):
        if not 1 <= r <= n:
            raise DomainError(f"Tucker rank R{m + 1}={r} outside [1, {n}]")
        if r > total // r:
            raise DomainError(
                f"Tucker rank R{m + 1}={r} exceeds the product of the other ranks ({total // r})"
            )
    return ranks


def _leading(mat: np.ndarray, r: int) -> np.ndarray:
    return truncated_svd(mat, r).u


def hosvd(t, ranks: Sequence[int]) -> TuckerModel:
    """Truncated higher-order SVD: leading left singular vectors per unfolding."""
    t = as_tensor(t)
    ranks = validate_tucker_ranks(t.shape, ranks)
    factors = [_leading(unfold(t, m), r) for m, r in enumerate(ranks)]
    core = multi_mode_product(t, factors, transpose=True)
    model = TuckerModel(core, factors)
    nt = frobenius_norm(t)
    model.fit_history.append(fit_of(t, reconstruct_tucker(model), nt) if nt > 0 else 1.0)
    return model


def tucker(t, ranks: Sequence[int], opts: DecompOptions | None = None) -> TuckerModel:
    """Fit a Tucker model by higher-order orthogonal iteration.

    Starts from :func:`hosvd` (or seeded random orthonormal factors with
    ``init="random"``). A sweep that lowers the fit is rejected, so
    ``fit_history`` is nondecreasing.
    """
    opts = opts or DecompOptions()
    t = as_tensor(t)
    ranks = validate_tucker_ranks(t.shape, ranks)
    norm_t = frobenius_norm(t)
    if opts.init == "random":
        rng = np.random.default_rng(opts.seed)
        factors = [np.linalg.qr(rng.standard_normal((n, r)))[0] for n, r in zip(t.shape, ranks)]
    else:
        factors = [_leading(unfold(t, m), r) for m, r in enumerate(ranks)]
    core = multi_mode_product(t, factors, transpose=True)
    if norm_t == 0.0:
        return TuckerModel(core, factors, [1.0])

    fit = fit_of(t, multi_mode_product(core, factors), norm_t)
    history = [fit]
    prev_fit = fit
    for _ in range(opts.max_iters):
        new = list(factors)
        for m in range(t.ndim):
            proj = [None if k == m else new[k] for k in range(t.ndim)]
            y = multi_mode_product(t, proj, transpose=True)
            new[m] = _leading(unfold(y, m), ranks[m])
        new_core = multi_mode_product(t, new, transpose=True)
        fit = fit_of(t, multi_mode_product(new_core, new), norm_t)
        if not np.isfinite(fit):
            raise NumericalError("HOOI produced a non-finite fit")
        if fit < prev_fit:
            break
        factors, core = new, new_core
        history.append(fit)
        if fit - prev_fit < opts.tol:
            break
        prev_fit = fit
    return TuckerModel(core, factors, history)
