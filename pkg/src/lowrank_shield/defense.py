"""Low-rank tensor defense: represent, decompose, reconstruct, clamp.

An image batch is an ``N x W x H x 3`` float array with pixels in [0, 1].
"""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import DefenseConfig
from .decomp import (
    DecompOptions,
    clamp_tt_ranks,
    cp_als,
    reconstruct_cp,
    reconstruct_tt,
    reconstruct_tucker,
    tt_svd,
    tucker,
)
from .errors import DomainError, NumericalError
from .tensor import as_tensor, frobenius_norm

__all__ = [
    "as_batch",
    "build_representation",
    "invert_representation",
    "split_patches",
    "stitch_patches",
    "sample_ranks",
    "resolve_ranks",
    "DefenseRecord",
    "DefenseReport",
    "defend",
    "worker_count",
]


def as_batch(images) -> np.ndarray:
    """Validate an ``N x W x H x 3`` batch with pixels in [0, 1]."""
    b = as_tensor(images)
    if b.ndim != 4 or b.shape[3] != 3:
        raise DomainError(f"an image batch must be N x W x H x 3, got {b.shape}")
    if b.min() < 0.0 or b.max() > 1.0:
        raise DomainError("image pixels must lie in [0, 1]")
    return b


def build_representation(batch: np.ndarray, representation: str) -> list[np.ndarray]:
    """Arrange a batch as the tensors to be decomposed.

    ``3-mode`` gives one ``W x H x 3`` tensor per image, ``3-mode-stacked`` one
    ``W x H x 3N`` tensor with image ``i`` in channels ``3i..3i+2``, and
    ``4-mode`` the batch itself as a single ``N x W x H x 3`` tensor.
    """
    batch = np.asarray(batch, dtype=np.float64)
    n, w, h, c = batch.shape
    if representation == "3-mode":
        return [batch[i].copy() for i in range(n)]
    if representation == "3-mode-stacked":
        return [batch.transpose(1, 2, 0, 3).reshape(w, h, n * c)]
    if representation == "4-mode":
        return [batch.copy()]
    raise DomainError(f"unknown representation {representation!r}")


def invert_representation(tensors: Sequence[np.ndarray], representation: str, n: int, w: int, h: int) -> np.ndarray:
    """Exact inverse of :func:`build_representation` (no clamping)."""
    tensors = list(tensors)
    if representation == "3-mode":
        if len(tensors) != n or any(t.shape != (w, h, 3) for t in tensors):
            raise DomainError(f"expected {n} tensors of shape {(w, h, 3)}")
        return np.stack(tensors)
    if len(tensors) != 1:
        raise DomainError(f"{representation} expects a single tensor, got {len(tensors)}")
    t = tensors[0]
    if representation == "3-mode-stacked":
        if t.shape != (w, h, 3 * n):
            raise DomainError(f"expected shape {(w, h, 3 * n)}, got {t.shape}")
        return t.reshape(w, h, n, 3).transpose(2, 0, 1, 3).copy()
    if representation == "4-mode":
        if t.shape != (n, w, h, 3):
            raise DomainError(f"expected shape {(n, w, h, 3)}, got {t.shape}")
        return t.copy()
    raise DomainError(f"unknown representation {representation!r}")


def _spatial_modes(t: np.ndarray) -> tuple[int, int]:
    return (1, 2) if t.ndim == 4 else (0, 1)


def split_patches(t: np.ndarray, pw: int, ph: int) -> list[list[np.ndarray]]:
    """Cut the two spatial modes into ``pw x ph`` tiles.

    Spatial modes are 1 and 2 of a 4-mode tensor and 0 and 1 otherwise. The
    grid is indexed ``[i][j]`` with ``i`` along width; edge tiles are smaller
    when the side does not divide evenly.
    """
    if pw < 1 or ph < 1:
        raise DomainError(f"patch sides must be >= 1, got {pw}x{ph}")
    a, b = _spatial_modes(t)
    grid = []
    for x0 in range(0, t.shape[a], pw):
        row = []
        for y0 in range(0, t.shape[b], ph):
            idx = [slice(None)] * t.ndim
            idx[a] = slice(x0, x0 + pw)
            idx[b] = slice(y0, y0 + ph)
            row.append(t[tuple(idx)].copy())
        grid.append(row)
    return grid


def stitch_patches(grid: Sequence[Sequence[np.ndarray]]) -> np.ndarray:
    """Reassemble a tile grid produced by :func:`split_patches`."""
    if not grid or not grid[0]:
        raise DomainError("empty patch grid")
    a, b = _spatial_modes(grid[0][0])
    try:
        rows = [np.concatenate(list(row), axis=b) for row in grid]
        return np.concatenate(rows, axis=a)
    except ValueError as exc:
        raise DomainError(f"inconsistent patch grid: {exc}") from None


def sample_ranks(pool: Sequence[Sequence[int]], rng: np.random.Generator) -> tuple[int, ...]:
    """Uniform draw of one rank list from ``pool``."""
    if len(pool) == 0:
        raise DomainError("rank pool is empty")
    return tuple(pool[int(rng.integers(len(pool)))])


def _clamp_tucker(shape: Sequence[int], ranks: Sequence[int]) -> list[int]:
    out = [max(1, min(int(r), n)) for r, n in zip(ranks, shape)]
    changed = True
    while changed:
        changed = False
        total = int(np.prod(out))
        for m, r in enumerate(out):
            cap = total // r
            if r > cap:
                out[m] = cap
                changed = True
                break
    return out


def resolve_ranks(decomposition: str, shape: Sequence[int], ranks: Sequence[int]) -> list[int]:
    """Expand rank shorthand and clamp to what ``shape`` can support."""
    ranks = [int(r) for r in ranks]
    d = len(shape)
    if decomposition == "tensor-train":
        if len(ranks) == d - 2:
            ranks = ranks + [shape[-1]]
        if len(ranks) != d - 1:
            raise DomainError(f"{len(ranks)} TT ranks do not fit a {d}-mode tensor")
        return clamp_tt_ranks(shape, ranks)
    if decomposition == "tucker":
        if len(ranks) != d:
            raise DomainError(f"{len(ranks)} Tucker ranks do not fit a {d}-mode tensor")
        return _clamp_tucker(shape, ranks)
    if decomposition == "parafac":
        return [ranks[0]]
    raise DomainError(f"unknown decomposition {decomposition!r}")


def _decompose(decomposition: str, t: np.ndarray, ranks: list[int], seed: int) -> np.ndarray:
    if decomposition == "tensor-train":
        return reconstruct_tt(tt_svd(t, ranks))
    opts = DecompOptions(seed=seed)
    if decomposition == "tucker":
        return reconstruct_tucker(tucker(t, ranks, opts))
    return reconstruct_cp(cp_als(t, ranks[0], opts))


@dataclass
class DefenseRecord:
    """One decomposed tensor (one tile when patching)."""

    batch: int
    tensor: int
    tile: tuple[int, int]
    shape: tuple[int, ...]
    requested: tuple[int, ...]
    ranks: tuple[int, ...]
    clamped: bool
    seconds: float
    rel_error: float
    failed: bool = False
    message: str = ""


@dataclass
class DefenseReport:
    records: list[DefenseRecord] = field(default_factory=list)

    @property
    def seconds(self) -> float:
        return float(sum(r.seconds for r in self.records))

    @property
    def mean_error(self) -> float:
        errs = [r.rel_error for r in self.records if not r.failed]
        return float(np.mean(errs)) if errs else float("nan")

    @property
    def failures(self) -> int:
        return sum(r.failed for r in self.records)

    def extend(self, other: "DefenseReport") -> None:
        self.records.extend(other.records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["batch", "tensor", "tile", "shape", "requested", "ranks", "clamped",
                    "seconds", "rel_error", "failed", "message"])
        for r in self.records:
            w.writerow([
                r.batch, r.tensor, f"{r.tile[0]}:{r.tile[1]}",
                "x".join(map(str, r.shape)),
                ",".join(map(str, r.requested)),
                ",".join(map(str, r.ranks)),
                int(r.clamped), f"{r.seconds:.6f}", f"{r.rel_error:.9g}", int(r.failed), r.message,
            ])
        return buf.getvalue()


def worker_count(threads: int | None = None) -> int:
    """Worker cap from the argument or ``LOWRANK_SHIELD_THREADS`` (0 means auto)."""
    if threads is None:
        try:
            threads = int(os.environ.get("LOWRANK_SHIELD_THREADS", "0"))
        except ValueError:
            threads = 0
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def _run_task(decomposition, tile, requested, seed):
    ranks = resolve_ranks(decomposition, tile.shape, requested)
    expected = requested
    if decomposition == "tensor-train" and len(requested) == tile.ndim - 2:
        expected = tuple(requested) + (tile.shape[-1],)
    clamped = tuple(ranks) != tuple(expected)
    start = time.perf_counter()
    try:
        approx = _decompose(decomposition, tile, ranks, seed)
        failed, message = False, ""
    except NumericalError as exc:
        approx, failed, message = tile, True, str(exc)
    seconds = time.perf_counter() - start
    norm = frobenius_norm(tile)
    err = frobenius_norm(tile - approx) / norm if norm > 0 else 0.0
    return approx, ranks, clamped, seconds, err, failed, message


def defend(batch, cfg: DefenseConfig, threads: int | None = None) -> tuple[np.ndarray, DefenseReport]:
    """Apply the low-rank defense to every image of ``batch``.

    Images are processed in chunks of ``cfg.batch_size`` (the last chunk may be
    smaller). Each chunk uses its own rank-sampling stream seeded by
    ``(cfg.seed, chunk index)``, drawing once per tensor and tile in row-major
    order. A tensor whose decomposition fails numerically is passed through
    unchanged and flagged in the report.
    """
    images = as_batch(batch)
    n_all, w, h, _ = images.shape
    tasks = []  # (chunk, tensor index, tile index, tile, requested)
    layouts = []  # per chunk: (start, stop, grid shapes per tensor)
    for chunk, start in enumerate(range(0, n_all, cfg.batch_size)):
        stop = min(start + cfg.batch_size, n_all)
        rng = np.random.default_rng((cfg.seed, chunk))
        tensors = build_representation(images[start:stop], cfg.representation)
        grids = []
        for ti, t in enumerate(tensors):
            grid = split_patches(t, *cfg.patch) if cfg.patch else [[t]]
            grids.append((len(grid), len(grid[0])))
            for i, row in enumerate(grid):
                for j, tile in enumerate(row):
                    requested = sample_ranks(cfg.rank_pool, rng) if cfg.rank_pool else cfg.ranks
                    tasks.append((chunk, ti, (i, j), tile, tuple(requested)))
        layouts.append((start, stop, grids))

    workers = min(worker_count(threads), max(1, len(tasks)))
    args = [(cfg.decomposition, tile, req, cfg.seed) for (_, _, _, tile, req) in tasks]
    if workers == 1:
        results = [_run_task(*a) for a in args]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda a: _run_task(*a), args))

    report = DefenseReport()
    out = np.empty_like(images)
    k = 0
    for start, stop, grids in layouts:
        rebuilt = []
        for rows, cols in grids:
            grid = []
            for _ in range(rows):
                row = []
                for _ in range(cols):
                    chunk, ti, tile_idx, tile, req = tasks[k]
                    approx, ranks, clamped, secs, err, failed, msg = results[k]
                    report.records.append(DefenseRecord(
                        chunk, ti, tile_idx, tuple(tile.shape), req, tuple(ranks),
                        clamped, secs, err, failed, msg,
                    ))
                    row.append(approx)
                    k += 1
                grid.append(row)
            rebuilt.append(stitch_patches(grid))
        out[start:stop] = invert_representation(rebuilt, cfg.representation, stop - start, w, h)
    np.clip(out, 0.0, 1.0, out=out)
    return out, report
