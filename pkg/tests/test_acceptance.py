"""Acceptance criteria 1-10.

Each test stores ``(passed, detail)`` in ``RESULTS``; the terminal summary
hook in conftest prints one line per criterion. Run this file directly for a
standalone report.
"""

import time

import numpy as np
import pytest

import desk
from lowrank_shield.attacks import LinearSoftmaxClassifier, fgsm, ifgsm, loss_gradient, pgd
from lowrank_shield.config import DefenseConfig, format_config, parse_config
from lowrank_shield.decomp import (
    DecompOptions,
    TTModel,
    cp_als,
    max_tt_ranks,
    reconstruct_cp,
    reconstruct_tt,
    reconstruct_tucker,
    relative_error,
    tt_svd,
    tucker,
)
from lowrank_shield.defense import defend, split_patches, stitch_patches
from lowrank_shield.imageio import DatasetManifest, ManifestRecord, decode_ppm, encode_ppm, load_ppm, save_ppm
from lowrank_shield.tensor import fold, unfold
from oracles import central_difference_grad, cp_elementwise, tt_quadruple_sum, tucker_elementwise

RESULTS: dict[int, tuple[bool, str]] = {}


def record(number, ok, detail):
    RESULTS[number] = (bool(ok), detail)
    assert ok, f"criterion {number}: {detail}"


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def random_feasible_tt_ranks(rng, shape):
    ranks, prev = [], 1
    for k in range(len(shape) - 1):
        limit = min(prev * shape[k], int(np.prod(shape[k + 1:])))
        r = int(rng.integers(1, limit + 1))
        ranks.append(r)
        prev = r
    return ranks


def test_criterion_1_tt_error_bound():
    rng = np.random.default_rng(101)
    worst = -np.inf
    with Timer() as tm:
        for _ in range(200):
            shape = tuple(int(v) for v in rng.integers(1, 13, size=int(rng.integers(3, 5))))
            t = rng.standard_normal(shape)
            model = tt_svd(t, random_feasible_tt_ranks(rng, shape))
            err = np.linalg.norm(t - reconstruct_tt(model))
            worst = max(worst, err - model.error_bound)
    ok = worst <= 1e-8 and tm.seconds < 30
    record(1, ok, f"max(err - bound) = {worst:.2e}, {tm.seconds:.1f}s")


def test_criterion_2_tt_oracle():
    rng = np.random.default_rng(202)
    worst = 0.0
    with Timer() as tm:
        for _ in range(50):
            n = rng.integers(1, 5, size=4)
            r = rng.integers(1, 4, size=3)
            g = [rng.standard_normal((n[0], r[0])), rng.standard_normal((r[0], n[1], r[1])),
                 rng.standard_normal((r[1], n[2], r[2])), rng.standard_normal((r[2], n[3]))]
            ref = tt_quadruple_sum(*g)
            got = reconstruct_tt(TTModel(g))
            worst = max(worst, np.linalg.norm(got - ref) / max(np.linalg.norm(ref), 1e-300))
    ok = worst <= 1e-12 and tm.seconds < 5
    record(2, ok, f"max relative difference {worst:.2e}, {tm.seconds:.2f}s")


def orthonormal(rng, n, r):
    return np.linalg.qr(rng.standard_normal((n, r)))[0]


def test_criterion_3_exact_recovery():
    rng = np.random.default_rng(303)
    checks = []
    with Timer() as tm:
        for _ in range(10):
            shape = tuple(int(v) for v in rng.integers(2, 7, size=int(rng.integers(3, 5))))
            t = rng.standard_normal(shape)
            checks.append(("tt-max", relative_error(t, reconstruct_tt(tt_svd(t, max_tt_ranks(shape)))) <= 1e-9))
            checks.append(("tucker-full", relative_error(t, reconstruct_tucker(tucker(t, shape))) <= 1e-9))
        for _ in range(10):
            ranks = (2, 3, 2)
            core = rng.standard_normal(ranks)
            t = tucker_elementwise(core, [orthonormal(rng, n, r) for n, r in zip((6, 5, 4), ranks)])
            model = tucker(t, ranks)
            checks.append(("tucker-contained", model.fit >= 1 - 1e-6
                           and relative_error(t, reconstruct_tucker(model)) <= 1e-6))
        for _ in range(10):
            factors = [rng.standard_normal((n, 3)) for n in (6, 5, 4)]
            t = cp_elementwise(np.ones(3), factors)
            model = cp_als(t, 3, DecompOptions(max_iters=1000, tol=1e-14))
            checks.append(("cp-contained", model.fit >= 1 - 1e-6))
            t1 = cp_elementwise(np.ones(1), [f[:, :1] for f in factors])
            checks.append(("cp-rank1", relative_error(t1, reconstruct_cp(cp_als(t1, 1))) <= 1e-9))
    failed = sorted({name for name, ok in checks if not ok})
    ok = not failed and tm.seconds < 60
    record(3, ok, f"{len(checks) - sum(not c for _, c in checks)}/{len(checks)} cases, "
                  f"failed: {failed or 'none'}, {tm.seconds:.1f}s")


def test_criterion_4_gradient_oracle():
    rng = np.random.default_rng(404)
    shape = (4, 4, 3)
    worst = 0.0
    with Timer() as tm:
        for _ in range(50):
            c = int(rng.integers(2, 6))
            model = LinearSoftmaxClassifier(rng.standard_normal((c, 48)), rng.standard_normal(c), shape)
            x = rng.random(shape)
            y = int(rng.integers(c))
            _, g = loss_gradient(model, x, y)
            fd = central_difference_grad(lambda z: loss_gradient(model, z, y)[0], x.copy(), h=1e-5)
            worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))
    ok = worst <= 1e-5 and tm.seconds < 10
    record(4, ok, f"max relative gradient error {worst:.2e}, {tm.seconds:.2f}s")


def test_criterion_5_attack_budget():
    rng = np.random.default_rng(505)
    shape = (8, 8, 3)
    worst, outside, count = -np.inf, 0, 0
    with Timer() as tm:
        for i in range(1000):
            model = LinearSoftmaxClassifier(rng.standard_normal((4, 192)), rng.standard_normal(4), shape)
            x = rng.random(shape)
            y = int(rng.integers(4))
            eps = float(rng.uniform(0, 16 / 255))
            kind = i % 3
            if kind == 0:
                adv = fgsm(model, x, y, eps)
            elif kind == 1:
                adv = ifgsm(model, x, y, eps, eps / 4, 10)
            else:
                adv = pgd(model, x, y, eps, eps / 4, 10, seed=i)
            worst = max(worst, np.max(np.abs(adv - x)) - eps)
            outside += int(adv.min() < 0 or adv.max() > 1)
            count += 1
        collapse = True
        for _ in range(50):
            model = LinearSoftmaxClassifier(rng.standard_normal((4, 192)), rng.standard_normal(4), shape)
            x = rng.random((4,) + shape)
            y = rng.integers(0, 4, 4)
            eps = float(rng.uniform(0, 16 / 255))
            collapse &= np.array_equal(ifgsm(model, x, y, eps, eps, 1), fgsm(model, x, y, eps))
    ok = worst <= 1e-12 and outside == 0 and collapse and tm.seconds < 60
    record(5, ok, f"{count} images, max excess {worst:.1e}, out of range {outside}, "
                  f"I-FGSM(1, eps) == FGSM: {collapse}, {tm.seconds:.1f}s")


def test_criterion_6_directional_reproduction():
    lines, ok = [], True
    with Timer() as tm:
        for seed in desk.SEEDS:
            clean = desk.clean_accuracy(seed)
            ok &= clean >= 0.90
            parts = [f"seed {seed}: clean {clean:.3f}"]
            for attack in desk.ATTACKS:
                att = desk.attacked_accuracy(seed, attack)
                dfd = desk.defended_accuracy(seed, attack, "batch")
                lost = clean - att
                recovered = (dfd - att) / lost if lost > 0 else 1.0
                ok &= dfd > att and recovered >= 0.5
                if attack in ("fgsm", "pgd"):
                    ok &= lost >= 0.30
                parts.append(f"{attack} {att:.3f}->{dfd:.3f}")
            lines.append(" ".join(parts))
    ok &= tm.seconds < 600
    record(6, ok, "; ".join(lines) + f"; {tm.seconds:.0f}s")


def test_criterion_7_batch_vs_single():
    lines, ok = [], True
    for seed in desk.SEEDS:
        for attack in desk.ATTACKS:
            batch = desk.defended_accuracy(seed, attack, "batch")
            single = desk.defended_accuracy(seed, attack, "single")
            ok &= batch >= single - 0.01
            lines.append(f"s{seed}/{attack} {batch:.3f} vs {single:.3f}")
    record(7, ok, "batch vs single: " + ", ".join(lines))


def test_criterion_8_tt_vs_slq():
    wins, lines = 0, []
    for seed in desk.SEEDS:
        seed_ok = True
        for attack in desk.ATTACKS:
            best_tt = max(desk.defended_accuracy(seed, attack, w) for w in ("batch", "single", "patched"))
            slq = desk.defended_accuracy(seed, attack, "slq")
            seed_ok &= best_tt >= slq
            lines.append(f"s{seed}/{attack} {best_tt:.3f} vs {slq:.3f}")
        wins += seed_ok
    record(8, wins >= 2, f"TT >= SLQ on {wins}/3 seeds: " + ", ".join(lines))


def test_criterion_9_patch_pipeline():
    lines, ok = [], True
    for seed in desk.SEEDS:
        model, test = desk.setup(seed)
        adv = desk.adversarial(seed, "pgd")
        cfg = desk.tt_patched(seed)
        out1, rep1 = defend(adv, cfg, threads=1)
        out2, rep2 = defend(adv, cfg, threads=4)
        same = np.array_equal(out1, out2) and [r.ranks for r in rep1.records] == [r.ranks for r in rep2.records]
        sane = out1.shape == adv.shape and out1.min() >= 0 and out1.max() <= 1 and rep1.failures == 0
        ok &= same and sane
        for attack in desk.ATTACKS:
            patched = desk.defended_accuracy(seed, attack, "patched")
            plain = desk.defended_accuracy(seed, attack, "batch")
            ok &= patched >= plain - 0.05
            lines.append(f"s{seed}/{attack} {patched:.3f} vs {plain:.3f}")
    record(9, ok, "patched vs unpatched: " + ", ".join(lines))


def test_criterion_10_round_trips(tmp_path):
    rng = np.random.default_rng(1010)
    failures = []
    with Timer() as tm:
        for i in range(20):
            w, h = (int(v) for v in rng.integers(1, 9, 2))
            raw = f"P6\n{w} {h}\n255\n".encode() + rng.integers(0, 256, w * h * 3, dtype=np.uint8).tobytes()
            path = tmp_path / f"{i}.ppm"
            save_ppm(decode_ppm(raw), path)
            if path.read_bytes() != raw or encode_ppm(load_ppm(path)) != raw:
                failures.append("ppm")
        records = [ManifestRecord(f"img_{i}.ppm", int(rng.integers(3)), ["train", "test"][i % 2])
                   for i in rng.permutation(30)]
        m = DatasetManifest(4, 4, 3, records)
        m.write(tmp_path / "m.tsv")
        if DatasetManifest.read(tmp_path / "m.tsv").records != records:
            failures.append("manifest")
        configs = [
            DefenseConfig("tensor-train", "4-mode", 5, (5, 90, 3), seed=42),
            DefenseConfig("tucker", "3-mode", 1, (3, 3, 2)),
            DefenseConfig("parafac", "3-mode-stacked", 4, (7,), seed=3),
            DefenseConfig("tensor-train", "4-mode", 5, patch=(8, 8), rank_pool=desk.PATCH_POOL, seed=1),
        ]
        for cfg in configs:
            if parse_config(format_config(cfg)) != cfg:
                failures.append("config")
        for _ in range(50):
            shape = tuple(int(v) for v in rng.integers(1, 6, size=int(rng.integers(2, 5))))
            t = rng.standard_normal(shape)
            for mode in range(len(shape)):
                if not np.array_equal(fold(unfold(t, mode), mode, shape), t):
                    failures.append("unfold")
            b = rng.random((2,) + tuple(int(v) for v in rng.integers(1, 20, 2)) + (3,))
            pw, ph = (int(v) for v in rng.integers(1, 10, 2))
            if not np.array_equal(stitch_patches(split_patches(b, pw, ph)), b):
                failures.append("patches")
    ok = not failures and tm.seconds < 10
    record(10, ok, f"failures: {sorted(set(failures)) or 'none'}, {tm.seconds:.2f}s")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
