import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lowrank_shield import defense as defense_mod
from lowrank_shield.config import DefenseConfig
from lowrank_shield.errors import DomainError, NumericalError
from lowrank_shield.defense import (
    as_batch,
    build_representation,
    defend,
    invert_representation,
    sample_ranks,
    split_patches,
    stitch_patches,
)

REPRS = ["3-mode", "3-mode-stacked", "4-mode"]


def random_batch(rng, n=3, w=6, h=5):
    return rng.random((n, w, h, 3))


def tt_cfg(**kw):
    base = dict(decomposition="tensor-train", representation="4-mode", batch_size=5, ranks=(5, 12, 3))
    base.update(kw)
    return DefenseConfig(**base)


def test_as_batch_validation(rng):
    with pytest.raises(DomainError):
        as_batch(rng.random((2, 4, 4, 4)))
    with pytest.raises(DomainError):
        as_batch(rng.random((2, 4, 4, 3)) + 1.0)


@pytest.mark.parametrize("representation", REPRS)
def test_single_image_degeneracy(rng, representation):
    b = random_batch(rng, n=1)
    (t,) = build_representation(b, representation)
    assert t.size == b.size
    assert np.array_equal(np.sort(t.ravel()), np.sort(b.ravel()))
    expected = {"3-mode": (6, 5, 3), "3-mode-stacked": (6, 5, 3), "4-mode": (1, 6, 5, 3)}
    assert t.shape == expected[representation]


def test_five_image_batch_shape():
    b = np.zeros((5, 300, 300, 3))
    assert build_representation(b, "4-mode")[0].shape == (5, 300, 300, 3)


@pytest.mark.parametrize("representation", REPRS)
def test_representation_round_trip(rng, representation):
    b = random_batch(rng, n=4)
    back = invert_representation(build_representation(b, representation), representation, 4, 6, 5)
    assert np.array_equal(back, b)


def test_stacked_slices_follow_image_order(rng):
    b = random_batch(rng, n=3)
    (t,) = build_representation(b, "3-mode-stacked")
    for x in range(6):
        for y in range(5):
            for c in range(3):
                assert t[x, y, 3 * 2 + c] == b[2, x, y, c]


def test_invert_shape_mismatch(rng):
    with pytest.raises(DomainError):
        invert_representation([np.zeros((6, 5, 6))], "3-mode-stacked", 3, 6, 5)
    with pytest.raises(DomainError):
        invert_representation([np.zeros((6, 5, 3))], "3-mode", 2, 6, 5)


def test_split_no_patching_identity(rng):
    t = rng.random((2, 8, 6, 3))
    grid = split_patches(t, 8, 6)
    assert len(grid) == 1 and len(grid[0]) == 1
    assert np.array_equal(grid[0][0], t)


def test_split_counts_36_tiles():
    grid = split_patches(np.zeros((5, 300, 300, 3)), 50, 50)
    tiles = [p for row in grid for p in row]
    assert len(tiles) == 36
    assert all(p.shape == (5, 50, 50, 3) for p in tiles)


def test_split_ragged_round_trip(rng):
    t = rng.random((16, 10, 3))
    grid = split_patches(t, 7, 7)
    assert [[p.shape[:2] for p in row] for row in grid] == [
        [(7, 7), (7, 3)], [(7, 7), (7, 3)], [(2, 7), (2, 3)]]
    assert np.array_equal(stitch_patches(grid), t)


def test_stitch_one_pixel_tiles():
    grid = [[np.full((1, 1, 3), 0.1), np.full((1, 1, 3), 0.2)],
            [np.full((1, 1, 3), 0.3), np.full((1, 1, 3), 0.4)]]
    out = stitch_patches(grid)
    assert out.shape == (2, 2, 3)
    assert out[1, 0, 0] == 0.3 and out[0, 1, 0] == 0.2


def test_stitch_inconsistent_grid():
    with pytest.raises(DomainError):
        stitch_patches([[np.zeros((2, 2, 3)), np.zeros((3, 2, 3))]])
    with pytest.raises(DomainError):
        stitch_patches([])


@given(st.integers(0, 2**31), st.integers(1, 9), st.integers(1, 9))
def test_split_stitch_property(seed, pw, ph):
    t = np.random.default_rng(seed).random((2, 11, 7, 3))
    assert np.array_equal(stitch_patches(split_patches(t, pw, ph)), t)


def test_sample_ranks_single_and_empty():
    rng = np.random.default_rng(0)
    assert all(sample_ranks([(5, 40, 3)], rng) == (5, 40, 3) for _ in range(10))
    with pytest.raises(DomainError):
        sample_ranks([], rng)


def test_sample_ranks_uniform():
    pool = [(5, 40, 3), (5, 50, 3), (5, 60, 3)]
    rng = np.random.default_rng(11)
    draws = [sample_ranks(pool, rng) for _ in range(100_000)]
    for entry in pool:
        assert abs(draws.count(entry) / len(draws) - 1 / 3) <= 0.03


def test_sample_ranks_deterministic():
    pool = [(1,), (2,), (3,)]
    a = [sample_ranks(pool, np.random.default_rng(5)) for _ in range(3)]
    r1, r2 = np.random.default_rng(5), np.random.default_rng(5)
    assert [sample_ranks(pool, r1) for _ in range(20)] == [sample_ranks(pool, r2) for _ in range(20)]
    assert len(set(a)) == 1


def test_reference_configuration_runs_one_tensor(rng):
    b = rng.random((5, 30, 30, 3))
    _, report = defend(b, tt_cfg(ranks=(5, 90, 3)), threads=1)
    assert len(report.records) == 1
    rec = report.records[0]
    assert rec.shape == (5, 30, 30, 3) and rec.ranks == (5, 90, 3) and not rec.clamped


@pytest.mark.parametrize("representation,ranks", [
    ("4-mode", (2, 12, 3)), ("3-mode", (6, 3)), ("3-mode-stacked", (6, 6))])
def test_maximal_ranks_lossless(rng, representation, ranks):
    b = random_batch(rng, n=2)
    out, report = defend(b, DefenseConfig("tensor-train", representation, 2, ranks), threads=1)
    assert not any(r.clamped for r in report.records)
    assert np.max(np.abs(out - b)) <= 1e-9


def test_rank_two_signal_with_sign_noise():
    g = np.random.default_rng(7)
    u, v, c = g.random((32, 2)), g.random((32, 2)), g.random((3, 2))
    clean = np.einsum("ir,jr,kr->ijk", u, v, c)
    clean = 0.2 + 0.6 * clean / clean.max()
    noisy = np.clip(clean + 8 / 255 * np.sign(g.standard_normal(clean.shape)), 0, 1)
    cfg = DefenseConfig("tensor-train", "4-mode", 1, (1, 8, 3), seed=7)
    out, _ = defend(noisy[None], cfg, threads=1)
    err = lambda x: np.linalg.norm(x - clean) / np.linalg.norm(clean)  # noqa: E731
    assert err(out[0]) < err(noisy)


def test_remainder_batch_and_clamping(rng):
    b = rng.random((7, 8, 8, 3))
    out, report = defend(b, tt_cfg(ranks=(5, 12, 3)), threads=1)
    assert out.shape == b.shape
    assert [r.shape[0] for r in report.records] == [5, 2]
    assert report.records[1].ranks == (2, 12, 3) and report.records[1].clamped
    assert not report.records[0].clamped


def test_three_mode_runs_per_image(rng):
    b = rng.random((4, 6, 6, 3))
    _, report = defend(b, DefenseConfig("tensor-train", "3-mode", 3, (4,)), threads=1)
    assert len(report.records) == 4
    assert all(r.ranks == (4, 3) for r in report.records)


@pytest.mark.parametrize("cfg", [
    DefenseConfig("tensor-train", "4-mode", 3, (3, 5, 3), seed=1),
    DefenseConfig("tensor-train", "3-mode-stacked", 3, (5,), seed=1),
    DefenseConfig("tucker", "3-mode", 1, (3, 3, 2), seed=1),
    DefenseConfig("tucker", "4-mode", 3, (2, 3, 3, 2), seed=1),
    DefenseConfig("parafac", "3-mode", 1, (3,), seed=1),
    DefenseConfig("tensor-train", "4-mode", 3, patch=(4, 3),
                  rank_pool=((3, 2, 3), (3, 3, 3), (2, 4, 2)), seed=9),
])
def test_invariants_and_determinism(rng, cfg):
    b = rng.random((5, 9, 7, 3))
    out1, rep1 = defend(b, cfg, threads=1)
    out2, rep2 = defend(b, cfg, threads=4)
    assert out1.shape == b.shape
    assert out1.min() >= 0 and out1.max() <= 1
    assert np.array_equal(out1, out2)
    strip = lambda rep: [(r.batch, r.tensor, r.tile, r.shape, r.ranks, r.rel_error) for r in rep.records]  # noqa: E731
    assert strip(rep1) == strip(rep2)


def test_patch_report_one_record_per_tile(rng):
    b = rng.random((5, 10, 10, 3))
    cfg = DefenseConfig("tensor-train", "4-mode", 5, patch=(4, 4), rank_pool=((5, 2, 3), (5, 3, 3)), seed=3)
    _, report = defend(b, cfg, threads=1)
    assert len(report.records) == 9
    assert [r.tile for r in report.records] == [(i, j) for i in range(3) for j in range(3)]
    assert {r.requested for r in report.records} <= {(5, 2, 3), (5, 3, 3)}


def test_single_image_representation_equivalence(rng):
    b = rng.random((1, 12, 10, 3))
    three, _ = defend(b, DefenseConfig("tensor-train", "3-mode", 1, (4, 3)), threads=1)
    four, _ = defend(b, DefenseConfig("tensor-train", "4-mode", 1, (1, 4, 3)), threads=1)
    assert np.linalg.norm(three - four) <= 1e-8 * np.linalg.norm(three)


def test_numerical_failure_passes_through(rng, monkeypatch):
    def boom(*args, **kwargs):
        raise NumericalError("forced", residual=1.0)

    monkeypatch.setattr(defense_mod, "_decompose", boom)
    b = rng.random((2, 4, 4, 3))
    out, report = defend(b, tt_cfg(batch_size=2, ranks=(1, 2, 1)), threads=1)
    assert np.array_equal(out, b)
    assert report.failures == 1 and report.records[0].failed
    assert "forced" in report.records[0].message
    assert "batch,tensor,tile" in report.to_csv()


def test_noise_attenuation_statistics():
    k, wins = 3, 0
    for trial in range(100):
        g = np.random.default_rng(1000 + trial)
        core = g.standard_normal((k, k, 3))
        # a constant column keeps the 0.5 offset inside the Tucker-(k, k, 3) span
        a, b = (np.linalg.qr(np.column_stack([np.ones(16), g.standard_normal((16, k - 1))]))[0]
                for _ in range(2))
        c = np.linalg.qr(g.standard_normal((3, 3)))[0]
        sig = np.einsum("abc,ia,jb,kc->ijk", core, a, b, c)
        sig = 0.5 + 0.3 * sig / np.abs(sig).max()
        eps = 8 / 255
        noisy = np.clip(sig + eps * g.choice([-1.0, 1.0], size=sig.shape), 0, 1)
        out, _ = defend(noisy[None], DefenseConfig("tensor-train", "3-mode", 1, (k, 3)), threads=1)
        wins += np.linalg.norm(out[0] - sig) < np.linalg.norm(noisy - sig)
    assert wins >= 95
