"""Stochastic local quantization (SLQ) baseline.

JPEG is approximated by a blockwise orthonormal DCT with libjpeg-style
luminance quantization applied per RGB channel. Color conversion, chroma
subsampling and entropy coding are omitted.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError

# Standard JPEG luminance quantization table (ITU T.81, Annex K).
LUMINANCE_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)
LUMINANCE_TABLE.setflags(write=False)


@lru_cache(maxsize=16)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix ``D`` with ``D[u, i] = a_u cos(pi (2i + 1) u / 2n)``."""
    if n < 1:
        raise DomainError(f"DCT size must be >= 1, got {n}")
    i = np.arange(n)
    d = np.cos(np.pi * (2 * i[None, :] + 1) * i[:, None] / (2 * n))
    d[0] *= np.sqrt(1.0 / n)
    d[1:] *= np.sqrt(2.0 / n)
    d.setflags(write=False)
    return d


def dct2(block: np.ndarray) -> np.ndarray:
    block = np.asarray(block, dtype=np.float64)
    return dct_matrix(block.shape[0]) @ block @ dct_matrix(block.shape[1]).T


def idct2(coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    return dct_matrix(coeffs.shape[0]).T @ coeffs @ dct_matrix(coeffs.shape[1])


def dct8(block) -> np.ndarray:
    block = np.asarray(block, dtype=np.float64)
    if block.shape != (8, 8):
        raise DomainError(f"dct8 needs an 8x8 block, got {block.shape}")
    return dct2(block)


def idct8(coeffs) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (8, 8):
        raise DomainError(f"idct8 needs 8x8 coefficients, got {coeffs.shape}")
    return idct2(coeffs)


def _check_quality(quality: int) -> int:
    q = int(quality)
    if q != quality or not 1 <= q <= 100:
        raise DomainError(f"quality must be an integer in [1, 100], got {quality}")
    return q


@lru_cache(maxsize=128)
def quality_table(quality: int) -> np.ndarray:
    """Luminance table scaled by the libjpeg quality rule.

    ``scale = 5000 / q`` below 50 and ``200 - 2q`` otherwise; each entry is
    ``floor((Q * scale + 50) / 100)`` with a floor of 1.
    """
    q = _check_quality(quality)
    scale = 5000.0 / q if q < 50 else 200.0 - 2.0 * q
    table = np.maximum(np.floor((LUMINANCE_TABLE * scale + 50.0) / 100.0), 1.0)
    table.setflags(write=False)
    return table


def _table_for(shape: tuple[int, int], quality: int) -> np.ndarray:
    table = quality_table(quality)
    if shape == (8, 8):
        return table
    # ragged edge block: map each frequency onto the nearest 8-point frequency
    rows = np.minimum(np.rint(np.arange(shape[0]) * 8.0 / shape[0]).astype(int), 7)
    cols = np.minimum(np.rint(np.arange(shape[1]) * 8.0 / shape[1]).astype(int), 7)
    return table[np.ix_(rows, cols)]


def quantize_block(coeffs, quality: int) -> np.ndarray:
    """Quantize and dequantize DCT coefficients (byte-scale units) at ``quality``."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    table = _table_for(coeffs.shape, quality)
    return np.rint(coeffs / table) * table


def _block_grid(w: int, h: int, block: int):
    for x0 in range(0, w, block):
        for y0 in range(0, h, block):
            yield slice(x0, x0 + block), slice(y0, y0 + block)


def _apply(image: np.ndarray, qualities_iter, block: int) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DomainError(f"an image must be W x H x 3, got {img.shape}")
    levels = img * 255.0 - 128.0
    out = np.empty_like(levels)
    for (sx, sy), q in zip(_block_grid(img.shape[0], img.shape[1], block), qualities_iter):
        for c in range(3):
            out[sx, sy, c] = idct2(quantize_block(dct2(levels[sx, sy, c]), q))
    return np.clip((out + 128.0) / 255.0, 0.0, 1.0)


def quantize_image(image, quality: int, block: int = 8) -> np.ndarray:
    """Quantize every block of ``image`` at a single quality."""
    q = _check_quality(quality)
    return _apply(image, _repeat(q), block)


def _repeat(q):
    while True:
        yield q


@dataclass(frozen=True)
class SlqConfig:
    qualities: tuple[int, ...] = (20, 40, 60, 80)
    block: int = 8
    seed: int = 0

    def __post_init__(self):
        qs = tuple(self.qualities)
        if not qs:
            raise DomainError("qualities must not be empty")
        for q in qs:
            _check_quality(q)
        object.__setattr__(self, "qualities", tuple(int(q) for q in qs))
        if self.block < 1:
            raise DomainError(f"block must be >= 1, got {self.block}")


def slq(image, cfg: SlqConfig | None = None, rng: np.random.Generator | None = None) -> np.ndarray:
    """Quantize each block at a quality drawn uniformly from ``cfg.qualities``.

    Blocks are visited in row-major order (width index outer) and one draw is
    made per block, shared by its three channels.
    """
    cfg = cfg or SlqConfig()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3:
        raise DomainError(f"an image must be W x H x 3, got {img.shape}")
    nblocks = -(-img.shape[0] // cfg.block) * -(-img.shape[1] // cfg.block)
    picks = rng.integers(len(cfg.qualities), size=nblocks)
    return _apply(img, (cfg.qualities[i] for i in picks), cfg.block)


def slq_batch(images, cfg: SlqConfig | None = None) -> np.ndarray:
    """SLQ over an ``N x W x H x 3`` batch; image ``i`` uses the stream ``(seed, i)``."""
    cfg = cfg or SlqConfig()
    images = np.asarray(images, dtype=np.float64)
    return np.stack([
        slq(img, cfg, np.random.default_rng((cfg.seed, i))) for i, img in enumerate(images)
    ])
