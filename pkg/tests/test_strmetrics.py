import math

import numpy as np
import pytest

from textmrf.errors import DimensionMismatch, EmptyDataset, ImageTooSmall
from textmrf.imagecore import save_rgb
from textmrf.strmetrics import (
    MetricConfig,
    age,
    evaluate_dataset,
    evaluate_pair,
    mse_percent,
    mssim,
    peps,
    pceps,
    psnr,
    report_csv,
    report_table,
)

import oracles
from conftest import random_rgb

CFG = MetricConfig()
C1 = (0.01 * 255) ** 2


def const(v, h=16, w=16):
    return np.full((h, w, 3), v, dtype=np.uint8)


def test_psnr_anchors():
    assert psnr(const(7), const(7)) == 100.0
    assert psnr(const(0), const(255)) == pytest.approx(0.0, abs=1e-12)
    # 10 * log10(255**2 / 256)
    assert psnr(const(100), const(116)) == pytest.approx(24.048404, abs=1e-3)
    assert psnr(const(100), const(116)) == pytest.approx(10 * math.log10(255**2 / 256), abs=1e-12)


def test_mse_anchors(rng):
    assert mse_percent(const(3), const(3)) == 0.0
    assert mse_percent(const(0), const(255)) == pytest.approx(100.0)
    a, b = random_rgb(rng, 9, 10), random_rgb(rng, 9, 10)
    assert mse_percent(a, b) == pytest.approx(oracles.mse_percent_loop(a, b), rel=1e-12)


def test_mssim_anchors(rng):
    a = random_rgb(rng, 16, 16)
    assert mssim(a, a) == 100.0
    # zero-variance windows: 100 * (2*100*150 + C1) / (100**2 + 150**2 + C1)
    expect = 100 * (2 * 100 * 150 + C1) / (100**2 + 150**2 + C1)
    assert expect == pytest.approx(92.3092, abs=1e-4)
    assert mssim(const(100), const(150)) == pytest.approx(expect, abs=1e-6)


def test_mssim_matches_double_loop(rng):
    for _ in range(3):
        a, b = random_rgb(rng, 14, 17), random_rgb(rng, 14, 17)
        assert mssim(a, b) == pytest.approx(oracles.ssim_loop(a, b), abs=1e-6)


def test_mssim_too_small():
    with pytest.raises(ImageTooSmall):
        mssim(const(1, 10, 20), const(2, 10, 20))
    with pytest.raises(ImageTooSmall):
        mssim(const(1, 10, 20), const(1, 10, 20))


def test_age_and_peps():
    a = const(40)
    assert age(a, a) == 0.0 and peps(a, a) == 0.0
    assert age(const(40), const(45)) == 5.0
    assert peps(const(0), const(255)) == 1.0
    half = const(0)
    half[:8] = 255
    assert peps(half, const(0)) == 0.5


def test_pceps_cases():
    a = const(0, 7, 9)
    b = a.copy()
    b[3, 4] = 255
    assert pceps(a, b) == 0.0
    assert pceps(a, a) == 0.0
    full = pceps(const(0, 7, 9), const(255, 7, 9))
    assert full == pytest.approx((7 - 2) * (9 - 2) / (7 * 9))
    with pytest.raises(ImageTooSmall):
        pceps(const(0, 2, 9), const(1, 2, 9))


def test_loop_oracles_on_random_pairs(rng):
    for _ in range(10):
        a, b = random_rgb(rng, 16, 16), random_rgb(rng, 16, 16)
        assert age(a, b) == pytest.approx(oracles.age_loop(a, b), abs=1e-12)
        assert peps(a, b) == oracles.peps_loop(a, b)
        assert pceps(a, b) == oracles.pceps_loop(a, b)
        assert psnr(a, b) == pytest.approx(oracles.psnr_loop(a, b), abs=1e-9)


def test_peps_monotone_in_threshold(rng):
    a, b = random_rgb(rng, 16, 16), random_rgb(rng, 16, 16)
    vals = [peps(a, b, MetricConfig(ep_threshold=t)) for t in range(1, 255, 7)]
    assert all(y <= x for x, y in zip(vals, vals[1:]))


def test_symmetry_and_cluster_bound(rng):
    for _ in range(20):
        a = random_rgb(rng, 16, 16)
        b = np.clip(a.astype(int) + rng.integers(-40, 41, a.shape), 0, 255).astype(np.uint8)
        ab, ba = evaluate_pair(a, b), evaluate_pair(b, a)
        assert ab == ba
        assert ab.pceps <= ab.peps


def test_psnr_decreases_with_mse(rng):
    a = random_rgb(rng, 16, 16).astype(float)
    noise = rng.normal(0, 1, a.shape)
    pairs = []
    for s in (2, 5, 10, 20, 40):
        b = np.clip(np.round(a + s * noise), 0, 255).astype(np.uint8)
        pairs.append((mse_percent(a.astype(np.uint8), b), psnr(a.astype(np.uint8), b)))
    pairs.sort()
    assert all(p2 < p1 for (_, p1), (_, p2) in zip(pairs, pairs[1:]))


def test_evaluate_pair_composition(rng):
    a, b = random_rgb(rng, 16, 16), random_rgb(rng, 16, 16)
    v = evaluate_pair(a, b)
    assert v.as_tuple() == (psnr(a, b), mssim(a, b), mse_percent(a, b), age(a, b), peps(a, b), pceps(a, b))
    assert evaluate_pair(a, a).as_tuple() == (100.0, 100.0, 0.0, 0.0, 0.0, 0.0)


def test_dimension_mismatch(rng):
    with pytest.raises(DimensionMismatch):
        evaluate_pair(random_rgb(rng, 16, 16), random_rgb(rng, 16, 17))


def _write_pair(tmp_path, name, a, b):
    save_rgb(tmp_path / f"{name}_p.png", a)
    save_rgb(tmp_path / f"{name}_g.png", b)
    return tmp_path / f"{name}_p.png", tmp_path / f"{name}_g.png"


def test_evaluate_dataset(tmp_path, rng):
    a = random_rgb(rng, 16, 16)
    one = evaluate_dataset([_write_pair(tmp_path, "x", a, a)])
    assert one.pair_count == 1 and one.aggregate == one.per_pair[0][1]

    b, c = random_rgb(rng, 16, 16), random_rgb(rng, 16, 16)
    pairs = [("p1",) + _write_pair(tmp_path, "y", a, b), ("p2",) + _write_pair(tmp_path, "z", b, c)]
    rep = evaluate_dataset(pairs)
    assert [pid for pid, _ in rep.per_pair] == ["p1", "p2"]
    rows = np.array([v.as_tuple() for _, v in rep.per_pair])
    assert rep.aggregate.as_tuple() == tuple(rows.mean(axis=0))

    with pytest.raises(EmptyDataset):
        evaluate_dataset([])


def test_evaluate_dataset_reports_failures(tmp_path, rng):
    a = random_rgb(rng, 16, 16)
    good = ("ok",) + _write_pair(tmp_path, "a", a, a)
    missing = ("gone", tmp_path / "nope.png", tmp_path / "a_g.png")
    save_rgb(tmp_path / "small.png", random_rgb(rng, 12, 12))
    wrong = ("size", tmp_path / "small.png", tmp_path / "a_g.png")
    rep = evaluate_dataset([good, missing, wrong], threads=3)
    assert [p for p, _ in rep.per_pair] == ["ok"]
    assert [p for p, _ in rep.failures] == ["gone", "size"]
    assert "NotFound" in rep.failures[0][1] and "DimensionMismatch" in rep.failures[1][1]
    text = report_csv(rep)
    lines = text.strip().split("\n")
    assert lines[0] == "pair_id,psnr,mssim,mse,age,peps,pceps,status"
    assert lines[-1].startswith("aggregate,100.000000,100.000000,0.000000")
    table = report_table(rep)
    assert table.splitlines()[0].split()[1:] == ["PSNR", "MSSIM", "MSE", "AGE", "pEPs", "pCEPs"]
