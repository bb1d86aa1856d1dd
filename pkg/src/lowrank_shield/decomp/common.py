from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..tensor import frobenius_norm


@dataclass(frozen=True)
class DecompOptions:
    """Stopping rule and initialization for the iterative engines (CP-ALS, HOOI).

    Iteration stops after ``max_iters`` sweeps or once the fit changes by less
    than ``tol`` between sweeps. ``seed`` drives any random initialization.
    """

    max_iters: int = 100
    tol: float = 1e-6
    seed: int = 0
    init: str = "hosvd"

    def __post_init__(self):
        if self.max_iters < 1:
            raise DomainError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise DomainError(f"tol must be > 0, got {self.tol}")
        if self.init not in ("hosvd", "random"):
            raise DomainError(f"init must be 'hosvd' or 'random', got {self.init!r}")


def relative_error(t, approx) -> float:
    """``||t - approx||_F / ||t||_F``."""
    t = np.asarray(t, dtype=np.float64)
    approx = np.asarray(approx, dtype=np.float64)
    if t.shape != approx.shape:
        raise DomainError(f"shape mismatch: {t.shape} vs {approx.shape}")
    nt = frobenius_norm(t)
    if nt == 0.0:
        raise DomainError("relative error is undefined for an all-zero reference tensor")
    return frobenius_norm(t - approx) / nt


def fit_of(t: np.ndarray, approx: np.ndarray, norm_t: float) -> float:
    return 1.0 - frobenius_norm(t - approx) / norm_t
