"""Tensor decomposition engines: Tensor-Train, CP and Tucker."""

from .common import DecompOptions, relative_error
from .cp import CPModel, cp_als, reconstruct_cp
from .tt import TTModel, clamp_tt_ranks, max_tt_ranks, reconstruct_tt, tt_svd
from .tucker import TuckerModel, hosvd, reconstruct_tucker, tucker, validate_tucker_ranks

__all__ = [
    "DecompOptions",
    "relative_error",
    "CPModel",
    "cp_als",
    "reconstruct_cp",
    "TTModel",
    "tt_svd",
    "reconstruct_tt",
    "max_tt_ranks",
    "clamp_tt_ranks",
    "TuckerModel",
    "hosvd",
    "tucker",
    "reconstruct_tucker",
    "validate_tucker_ranks",
]
