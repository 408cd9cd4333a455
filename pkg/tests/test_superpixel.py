import numpy as np
import pytest

from textmrf.errors import InvalidK
from textmrf.imagecore import rgb_to_lab
from textmrf.superpixel import (
    LabelMap,
    SlicParams,
    boundary_length,
    enforce_connectivity,
    grid_shape,
    load_label_map,
    save_label_map,
    slic,
    slic_iterate,
)

import oracles


def uniform_lab(h, w, value=128):
    return rgb_to_lab(np.full((h, w, 3), value, dtype=np.uint8))


def same_partition(a, b):
    pairs = set(zip(a.ravel().tolist(), b.ravel().tolist()))
    return len(pairs) == len(np.unique(a)) == len(np.unique(b))


def kmeans_full_oracle(lab, centers, S, m, iters):
    """Unwindowed labxy k-means: every pixel compared with every center."""
    h, w = lab.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w]
    feats = np.concatenate([lab.reshape(-1, 3), yy.reshape(-1, 1), xx.reshape(-1, 1)], axis=1)
    c = np.array(centers, dtype=float)
    wts = np.array([1, 1, 1, (m / S) ** 2, (m / S) ** 2])
    for _ in range(iters):
        d = (((feats[:, None, :] - c[None, :, :]) ** 2) * wts).sum(axis=2)
        lbl = d.argmin(axis=1)
        for k in range(len(c)):
            if (lbl == k).any():
                c[k] = feats[lbl == k].mean(axis=0)
    return lbl.reshape(h, w)


def test_single_pixel():
    lm = slic(uniform_lab(1, 1), SlicParams(k=1))
    assert lm.n_segments == 1 and lm.labels.tolist() == [[0]]


def test_invalid_k():
    with pytest.raises(InvalidK):
        slic(uniform_lab(3, 3), SlicParams(k=10))
    with pytest.raises(InvalidK):
        SlicParams(k=0)


def test_grid_shape():
    assert grid_shape(512, 512, 400) == (20, 20)
    assert grid_shape(64, 64, 2) == (1, 2)
    assert grid_shape(64, 64, 16) == (4, 4)


def test_uniform_image_grid_regions():
    lab = uniform_lab(64, 64)
    lm = slic(lab, SlicParams(k=16))
    assert lm.n_segments == 16
    S2 = 64 * 64 / 16
    sizes = lm.sizes()
    assert sizes.min() >= 0.5 * S2 and sizes.max() <= 2 * S2
    init = [(*lab[0, 0], (j + 0.5) * 16 // 1, (i + 0.5) * 16 // 1) for j in range(4) for i in range(4)]
    ref = kmeans_full_oracle(lab, init, 16.0, 10.0, 10)
    assert same_partition(lm.labels, ref)


def test_two_halves_k2():
    img = np.zeros((64, 64, 3), np.uint8)
    img[:, 32:] = 255
    lm = slic(rgb_to_lab(img), SlicParams(k=2))
    for half in (lm.labels[:, :32], lm.labels[:, 32:]):
        share = np.bincount(half.ravel()).max() / half.size
        assert share >= 0.99
    assert lm.labels[0, 0] != lm.labels[0, 63]


@pytest.mark.parametrize("k", [4, 16, 64])
def test_invariants_on_noise(rng, k):
    img = rng.integers(0, 256, (64, 64, 3), dtype=np.uint8)
    lab = rgb_to_lab(img)
    lm = slic(lab, SlicParams(k=k))
    assert lm.labels.shape == (64, 64)
    assert lm.sizes().sum() == 64 * 64
    assert set(np.unique(lm.labels)) == set(range(lm.n_segments))
    comps = oracles.flood_fill_components(lm.labels)
    assert all(v == 1 for v in comps.values())
    e = slic_iterate(lab, SlicParams(k=k)).energies
    assert all(b <= a * (1 + 1e-12) for a, b in zip(e, e[1:]))


def test_deterministic_across_runs_and_threads(rng):
    lab = rgb_to_lab(rng.integers(0, 256, (48, 40, 3), dtype=np.uint8))
    ref = slic(lab, SlicParams(k=20))
    for t in (1, 2, 4, 8):
        again = slic(lab, SlicParams(k=20), threads=t)
        assert np.array_equal(again.labels, ref.labels)


def test_compactness_does_not_lengthen_boundaries_on_uniform_image():
    lab = uniform_lab(64, 64)
    lengths = [boundary_length(slic(lab, SlicParams(k=16, compactness_m=m)).labels) for m in (2, 5, 10, 20, 40)]
    assert all(b <= a for a, b in zip(lengths, lengths[1:]))


def test_connectivity_keeps_connected_map():
    labels = np.zeros((8, 8), np.int32)
    labels[:, 4:] = 1
    labels[4:, :4] = 2
    out = enforce_connectivity(LabelMap(labels, 3), uniform_lab(8, 8))
    assert out.n_segments == 3 and same_partition(out.labels, labels)


def test_connectivity_absorbs_orphan():
    labels = np.zeros((6, 6), np.int32)
    labels[:, 3:] = 1
    labels[2, 1] = 1  # orphan of label 1 inside label 0
    out = enforce_connectivity(LabelMap(labels, 2), uniform_lab(6, 6))
    assert out.n_segments == 2
    assert out.labels[2, 1] == out.labels[0, 0]


def test_connectivity_on_random_maps(rng):
    for _ in range(10):
        labels = rng.integers(0, 5, (12, 12)).astype(np.int32)
        lab = rgb_to_lab(rng.integers(0, 256, (12, 12, 3), dtype=np.uint8))
        out = enforce_connectivity(LabelMap(labels, 5), lab)
        comps = oracles.flood_fill_components(out.labels)
        assert all(v == 1 for v in comps.values())
        assert set(np.unique(out.labels)) == set(range(out.n_segments))
        # fragments below 0.25 * (144 / 5) = 7.2 px have been absorbed
        assert out.sizes().min() >= 7.2 or out.n_segments == 1


def test_label_map_png_roundtrip(tmp_path, rng):
    lm = slic(rgb_to_lab(rng.integers(0, 256, (30, 30, 3), dtype=np.uint8)), SlicParams(k=9))
    save_label_map(tmp_path / "l.png", lm)
    back = load_label_map(tmp_path / "l.png")
    assert back.n_segments == lm.n_segments and same_partition(back.labels, lm.labels)
