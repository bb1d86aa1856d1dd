"""Defense configuration and its flat ``key=value`` text grammar.

Example::

    decomposition=tensor-train representation=4-mode batch=5 ranks=5,90,3 seed=42

Optional keys are ``patch=WxH`` and ``rank-pool=a,b,c;d,e,f``. ``ranks`` may
be omitted when a rank pool is given.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import UsageError

DECOMPOSITIONS = ("parafac", "tucker", "tensor-train")
REPRESENTATIONS = ("3-mode", "3-mode-stacked", "4-mode")
KEYS = ("decomposition", "representation", "batch", "ranks", "patch", "rank-pool", "seed")

Ranks = tuple[int, ...]


def _check_ranks(decomposition: str, representation: str, batch: int, ranks: Ranks) -> None:
    if not ranks:
        raise UsageError("a rank list must not be empty")
    if any(r < 1 for r in ranks):
        raise UsageError(f"ranks must be positive integers, got {list(ranks)}")
    n = len(ranks)
    if decomposition == "parafac":
        if n != 1:
            raise UsageError(f"parafac takes a single rank, got {list(ranks)}")
    elif decomposition == "tucker":
        order = 4 if representation == "4-mode" else 3
        if n != order:
            raise UsageError(f"tucker on {representation} needs {order} ranks, got {list(ranks)}")
    elif representation == "4-mode":
        if n != 3:
            raise UsageError(f"tensor-train on 4-mode needs exactly 3 ranks, got {list(ranks)}")
        if ranks[0] > batch:
            raise UsageError(f"first TT rank {ranks[0]} exceeds the batch size {batch}")
        if ranks[2] > 3:
            raise UsageError(f"third TT rank {ranks[2]} exceeds the channel count 3")
    else:
        if n not in (1, 2):
            raise UsageError(f"tensor-train on {representation} takes 1 or 2 ranks, got {list(ranks)}")
        if representation == "3-mode" and n == 2 and ranks[1] > 3:
            raise UsageError(f"second TT rank {ranks[1]} exceeds the channel count 3")


@dataclass(frozen=True)
class DefenseConfig:
    """The quadruple (decomposition, representation, batch size, ranks) plus extensions.

    Rank shorthand: tensor-train on a 3-mode or stacked representation may give
    a single spatial rank ``r``; the channel rank then defaults to the full
    channel mode (3, or ``3 * batch`` when stacked).
    """

    decomposition: str
    representation: str
    batch_size: int
    ranks: Ranks = ()
    patch: Optional[tuple[int, int]] = None
    rank_pool: Optional[tuple[Ranks, ...]] = None
    seed: int = 0

    def __post_init__(self):
        if self.decomposition not in DECOMPOSITIONS:
            raise UsageError(
                f"unknown decomposition {self.decomposition!r}; valid: {', '.join(DECOMPOSITIONS)}"
            )
        if self.representation not in REPRESENTATIONS:
            raise UsageError(
                f"unknown representation {self.representation!r}; valid: {', '.join(REPRESENTATIONS)}"
            )
        if self.batch_size < 1:
            raise UsageError(f"batch must be >= 1, got {self.batch_size}")
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if self.rank_pool is not None:
            pool = tuple(tuple(int(r) for r in entry) for entry in self.rank_pool)
            if not pool:
                raise UsageError("rank-pool must not be empty")
            object.__setattr__(self, "rank_pool", pool)
            for entry in pool:
                _check_ranks(self.decomposition, self.representation, self.batch_size, entry)
        elif not self.ranks:
            raise UsageError("either ranks or rank-pool is required")
        if self.ranks:
            _check_ranks(self.decomposition, self.representation, self.batch_size, self.ranks)
        if self.patch is not None:
            pw, ph = (int(v) for v in self.patch)
            if pw < 1 or ph < 1:
                raise UsageError(f"patch sides must be >= 1, got {pw}x{ph}")
            object.__setattr__(self, "patch", (pw, ph))

    def format(self) -> str:
        return format_config(self)


def _ints(text: str, key: str) -> Ranks:
    try:
        out = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"{key} expects comma-separated integers, got {text!r}") from None
    return out


def parse_config(text: str) -> DefenseConfig:
    """Parse the whitespace-separated ``key=value`` grammar into a :class:`DefenseConfig`."""
    fields: dict[str, str] = {}
    for token in text.split():
        key, sep, value = token.partition("=")
        if not sep or key not in KEYS:
            raise UsageError(f"unknown config token {token!r}; valid keys: {', '.join(KEYS)}")
        if key in fields:
            raise UsageError(f"duplicate config key {key!r}")
        fields[key] = value
    for key in ("decomposition", "representation", "batch"):
        if key not in fields:
            raise UsageError(f"config is missing {key}=...; valid keys: {', '.join(KEYS)}")
    try:
        batch = int(fields["batch"])
        seed = int(fields.get("seed", "0"))
    except ValueError:
        raise UsageError("batch and seed must be integers") from None
    ranks = _ints(fields["ranks"], "ranks") if "ranks" in fields else ()
    patch = None
    if "patch" in fields:
        w, sep, h = fields["patch"].lower().partition("x")
        if not sep:
            raise UsageError(f"patch expects WxH, got {fields['patch']!r}")
        try:
            patch = (int(w), int(h))
        except ValueError:
            raise UsageError(f"patch expects WxH, got {fields['patch']!r}") from None
    pool = None
    if "rank-pool" in fields:
        pool = tuple(_ints(entry, "rank-pool") for entry in fields["rank-pool"].split(";") if entry)
    return DefenseConfig(
        decomposition=fields["decomposition"],
        representation=fields["representation"],
        batch_size=batch,
        ranks=ranks,
        patch=patch,
        rank_pool=pool,
        seed=seed,
    )


def format_config(cfg: DefenseConfig) -> str:
    parts = [
        f"decomposition={cfg.decomposition}",
        f"representation={cfg.representation}",
        f"batch={cfg.batch_size}",
    ]
    if cfg.ranks:
        parts.append("ranks=" + ",".join(map(str, cfg.ranks)))
    if cfg.patch is not None:
        parts.append(f"patch={cfg.patch[0]}x{cfg.patch[1]}")
    if cfg.rank_pool is not None:
        parts.append("rank-pool=" + ";".join(",".join(map(str, e)) for e in cfg.rank_pool))
    parts.append(f"seed={cfg.seed}")
    return " ".join(parts)
