"""Attack / defend / classify experiment loops and their CSV reports."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .attacks import AttackConfig, LabeledDataset, LinearSoftmaxClassifier, accuracy, run_attack
from .config import DefenseConfig, parse_config
from .decomp import relative_error
from .defense import defend
from .errors import UsageError
from .slq import SlqConfig, slq_batch

COLUMNS = ("config", "attack", "eps", "clean_acc", "att_acc", "def_acc", "runtime_s", "recon_err")
SLQ_TOKEN = "slq"


@dataclass(frozen=True)
class BenchRow:
    config: str
    attack: str
    eps: float
    clean_acc: float
    att_acc: float
    def_acc: float
    runtime_s: float
    recon_err: float


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def to_csv(self, with_runtime: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([
                r.config, r.attack, f"{r.eps:.6g}", f"{r.clean_acc:.4f}", f"{r.att_acc:.4f}",
                f"{r.def_acc:.4f}", f"{r.runtime_s:.4f}" if with_runtime else "", f"{r.recon_err:.6f}",
            ])
        return buf.getvalue()

    def to_table(self) -> str:
        """Aligned human-readable table (not meant to be parsed)."""
        head = ["config", "attack", "eps", "clean", "attacked", "defended", "time[s]", "recon"]
        body = [
            [r.config, r.attack, f"{r.eps * 255:.1f}/255", f"{100 * r.clean_acc:.2f}",
             f"{100 * r.att_acc:.2f}", f"{100 * r.def_acc:.2f}", f"{r.runtime_s:.2f}", f"{r.recon_err:.4f}"]
            for r in self.rows
        ]
        widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
        lines = ["  ".join(cell.ljust(wd) for cell, wd in zip(row, widths)).rstrip() for row in [head] + body]
        return "\n".join(lines)


def parse_defense(token: str) -> DefenseConfig | str:
    """A config string, or the literal ``slq`` for the quantization baseline."""
    token = token.strip()
    if token == SLQ_TOKEN or token.startswith(SLQ_TOKEN + " "):
        return token
    return parse_config(token)


def _slq_cfg(token: str) -> SlqConfig:
    seed = 0
    for part in token.split()[1:]:
        key, _, value = part.partition("=")
        if key != "seed":
            raise UsageError(f"unknown slq option {part!r}; valid: seed=N")
        seed = int(value)
    return SlqConfig(seed=seed)


def apply_defense(images: np.ndarray, defense: DefenseConfig | str, threads: int | None = None):
    """Run one defense; returns ``(defended, seconds, mean relative error)``."""
    start = time.perf_counter()
    if isinstance(defense, str):
        out = slq_batch(images, _slq_cfg(defense))
        secs = time.perf_counter() - start
        errs = [relative_error(x, y) for x, y in zip(images, out) if np.any(x)]
        return out, secs, float(np.mean(errs)) if errs else 0.0
    out, report = defend(images, defense, threads)
    secs = time.perf_counter() - start
    return out, secs, report.mean_error


def _label(defense: DefenseConfig | str) -> str:
    return defense if isinstance(defense, str) else defense.format()


def run_bench(
    model: LinearSoftmaxClassifier,
    data: LabeledDataset,
    defenses: Sequence[DefenseConfig | str],
    attacks: Sequence[str],
    attack_cfg: AttackConfig,
    threads: int | None = None,
) -> BenchReport:
    """One row per (defense, attack); each attack is generated once and reused."""
    clean = accuracy(model, data)
    report = BenchReport()
    adversarial = {name: run_attack(name, model, data.images, data.labels, attack_cfg) for name in attacks}
    for defense in defenses:
        for name in attacks:
            adv = adversarial[name]
            defended, secs, err = apply_defense(adv, defense, threads)
            report.rows.append(BenchRow(
                _label(defense), name, attack_cfg.epsilon, clean,
                accuracy(model, (adv, data.labels)),
                accuracy(model, (defended, data.labels)), secs, err,
            ))
    return report


def sweep_configs(ranks: Iterable[int], batches: Sequence[int], seed: int = 0) -> list[DefenseConfig]:
    """TT configs over the middle rank with the first rank fixed to the batch size.

    Batch size 1 uses the per-image 3-mode representation; larger batches use
    the 4-mode representation with ranks ``(batch, r, 3)``.
    """
    ranks = list(ranks)
    if not ranks:
        raise UsageError("the rank range is empty")
    if not batches:
        raise UsageError("no batch sizes given")
    out = []
    for b in batches:
        for r in ranks:
            if b == 1:
                out.append(DefenseConfig("tensor-train", "3-mode", 1, (r, 3), seed=seed))
            else:
                out.append(DefenseConfig("tensor-train", "4-mode", b, (b, r, 3), seed=seed))
    return out


def rank_range(start: int, stop: int, step: int) -> list[int]:
    """Inclusive integer range; rejects empty or non-advancing ranges."""
    if step < 1:
        raise UsageError(f"rank step must be >= 1, got {step}")
    if start < 1 or stop < start:
        raise UsageError(f"empty rank range {start}..{stop}")
    return list(range(start, stop + 1, step))
