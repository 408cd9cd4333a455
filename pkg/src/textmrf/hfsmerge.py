"""Two-stage region merging over superpixels and seed-guided text segment selection.

Stage one greedily fuses the adjacent pair with the smallest mean-color
difference while it stays under a threshold. Stage two does the same with a
blended score of color difference, histogram distance and boundary weakness.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, StageError
from .imagecore import as_mask, check_same_size, rgb_to_lab
from .morphref import RefineConfig, SeedResult, StructuringElement, dilate, refine_seed
from .superpixel import FOUR_CONNECTED, LabelMap, SlicParams, slic

HIST_BINS = 8
COLOR_NORM = 100.0


@dataclass(frozen=True)
class Stage2Weights:
    w_color: float = 0.5
    w_hist: float = 0.3
    w_boundary: float = 0.2

    def __post_init__(self):
        ws = (self.w_color, self.w_hist, self.w_boundary)
        if min(ws) < 0 or abs(sum(ws) - 1.0) > 1e-9:
            raise ValueError("stage-2 weights must be non-negative and sum to 1")


@dataclass(frozen=True)
class MergeConfig:
    stage1_color_thresh: float = 8.0
    stage2_score_thresh: float = 0.35
    stage2_weights: Stage2Weights = field(default_factory=Stage2Weights)

    def __post_init__(self):
        if self.stage1_color_thresh < 0 or self.stage2_score_thresh < 0:
            raise ValueError("merge thresholds must be >= 0")


@dataclass(frozen=True)
class SelectConfig:
    overlap_thresh: float = 0.30
    min_seed_pixels: int = 1
    final_dilate_radius: int = 2
    # share of a seed component a single segment must hold to be selected on its own
    component_share: float = 0.80
    # seed components below this size never trigger the share rule
    min_component_pixels: int = 64

    def __post_init__(self):
        if not 0.0 < self.overlap_thresh <= 1.0:
            raise ValueError("overlap_thresh must lie in (0, 1]")
        if self.final_dilate_radius < 0:
            raise ValueError("final_dilate_radius must be >= 0")


@dataclass
class Region:
    id: int
    pixel_count: int
    mean_lab: np.ndarray
    histogram: np.ndarray  # normalized, HIST_BINS**3 bins
    bbox: tuple[int, int, int, int]  # y0, x0, y1, x1 (exclusive)
    perimeter: int  # pixel edges on the region outline, image border included


@dataclass
class Edge:
    shared_boundary_len: int
    color_dist: float
    hist_dist: float


@dataclass
class RegionGraph:
    labels: LabelMap
    regions: list[Region]
    edges: dict[tuple[int, int], Edge]  # keyed (i, j) with i < j

    def neighbors(self, i: int) -> list[int]:
        return sorted({b if a == i else a for a, b in self.edges if i in (a, b)})


def lab_histogram_bins(lab: np.ndarray) -> np.ndarray:
    """Flat 8x8x8 bin index per pixel; L spans [0, 100], a and b span [-128, 128)."""
    L = np.clip((lab[..., 0] / 100.0 * HIST_BINS).astype(np.int64), 0, HIST_BINS - 1)
    a = np.clip(((lab[..., 1] + 128.0) / 256.0 * HIST_BINS).astype(np.int64), 0, HIST_BINS - 1)
    b = np.clip(((lab[..., 2] + 128.0) / 256.0 * HIST_BINS).astype(np.int64), 0, HIST_BINS - 1)
    return (L * HIST_BINS + a) * HIST_BINS + b


def chi2_distance(h1: np.ndarray, h2: np.ndarray) -> float:
    """Half chi-squared distance between normalized histograms, in [0, 1]."""
    s = h1 + h2
    nz = s > 0
    d = h1[nz] - h2[nz]
    return float(0.5 * np.sum(d * d / s[nz]))


def delta_e(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.sum((np.asarray(a) - np.asarray(b)) ** 2)))


def build_region_graph(lm: LabelMap, lab: np.ndarray) -> RegionGraph:
    labels = np.asarray(lm.labels)
    lab = np.asarray(lab, dtype=np.float64)
    if labels.shape != lab.shape[:2]:
        raise DimensionMismatch(f"label map {labels.shape} vs image {lab.shape[:2]}")
    n = lm.n_segments
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=n)
    means = np.stack([np.bincount(flat, weights=lab[..., c].ravel(), minlength=n) for c in range(3)], axis=1)
    means /= np.maximum(counts, 1)[:, None]
    nb = HIST_BINS**3
    hist = np.bincount(flat * nb + lab_histogram_bins(lab).ravel(), minlength=n * nb).reshape(n, nb).astype(np.float64)
    hist /= np.maximum(counts, 1)[:, None]

    # boundary pairs, one per 4-adjacent pixel pair with different labels
    pa, pb = [], []
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        diff = a != b
        pa.append(np.minimum(a[diff], b[diff]))
        pb.append(np.maximum(a[diff], b[diff]))
    pa = np.concatenate(pa).astype(np.int64)
    pb = np.concatenate(pb).astype(np.int64)
    keys, shared = np.unique(pa * n + pb, return_counts=True)

    perim = np.bincount(pa, minlength=n) + np.bincount(pb, minlength=n)
    h, w = labels.shape
    perim += np.bincount(labels[0, :], minlength=n) + np.bincount(labels[-1, :], minlength=n)
    perim += np.bincount(labels[:, 0], minlength=n) + np.bincount(labels[:, -1], minlength=n)

    regions = []
    objs = ndimage.find_objects(labels + 1, max_label=n)
    for i in range(n):
        sl = objs[i]
        bbox = (sl[0].start, sl[1].start, sl[0].stop, sl[1].stop) if sl is not None else (0, 0, 0, 0)
        regions.append(Region(i, int(counts[i]), means[i].copy(), hist[i].copy(), bbox, int(perim[i])))

    edges = {}
    for key, s in zip(keys.tolist(), shared.tolist()):
        i, j = divmod(key, n)
        edges[(i, j)] = Edge(int(s), delta_e(means[i], means[j]), chi2_distance(hist[i], hist[j]))
    return RegionGraph(lm, regions, edges)


@dataclass
class MergeEvent:
    stage: int
    kept: int
    absorbed: int
    value: float
    n_segments: int  # live regions after this merge


@dataclass
class MergeResult:
    labels: LabelMap
    events: list[MergeEvent]
    n_initial: int


class _Agglomerator:
    def __init__(self, g: RegionGraph):
        self.count = {r.id: r.pixel_count for r in g.regions}
        self.mean = {r.id: r.mean_lab.copy() for r in g.regions}
        self.hist_mass = {r.id: r.histogram * r.pixel_count for r in g.regions}
        self.perim = {r.id: r.perimeter for r in g.regions}
        self.shared: dict[int, dict[int, int]] = {r.id: {} for r in g.regions}
        for (i, j), e in g.edges.items():
            self.shared[i][j] = e.shared_boundary_len
            self.shared[j][i] = e.shared_boundary_len
        self.version = {r.id: 0 for r in g.regions}
        self.parent = {r.id: r.id for r in g.regions}
        self.live = len(g.regions)
        self.events: list[MergeEvent] = []

    def hist(self, i):
        return self.hist_mass[i] / self.count[i]

    def color_dist(self, i, j):
        return delta_e(self.mean[i], self.mean[j])

    def score(self, i, j, w: Stage2Weights):
        color = self.color_dist(i, j) / COLOR_NORM
        hd = chi2_distance(self.hist(i), self.hist(j))
        smaller = min(self.perim[i], self.perim[j])
        boundary = self.shared[i][j] / smaller if smaller > 0 else 0.0
        return w.w_color * color + w.w_hist * hd + w.w_boundary * (1.0 - boundary)

    def merge(self, i, j, stage, value):
        keep, gone = min(i, j), max(i, j)
        s = self.shared[keep].pop(gone)
        self.shared[gone].pop(keep)
        total = self.count[keep] + self.count[gone]
        self.mean[keep] = (self.mean[keep] * self.count[keep] + self.mean[gone] * self.count[gone]) / total
        self.count[keep] = total
        self.hist_mass[keep] = self.hist_mass[keep] + self.hist_mass[gone]
        self.perim[keep] = self.perim[keep] + self.perim[gone] - 2 * s
        for k, b in self.shared.pop(gone).items():
            self.shared[k].pop(gone)
            nb = self.shared[keep].get(k, 0) + b
            self.shared[keep][k] = nb
            self.shared[k][keep] = nb
        for d in (self.count, self.mean, self.hist_mass, self.perim, self.version):
            d.pop(gone)
        self.version[keep] += 1
        self.parent[gone] = keep
        self.live -= 1
        self.events.append(MergeEvent(stage, keep, gone, value, self.live))
        return keep

    def run_stage(self, stage, cost, thresh):
        def entry(i, j):
            a, b = min(i, j), max(i, j)
            return (cost(a, b), a, b, self.version[a], self.version[b])

        heap = [entry(i, j) for i in self.shared for j in self.shared[i] if i < j]
        heapq.heapify(heap)
        while heap:
            c, a, b, va, vb = heapq.heappop(heap)
            if c >= thresh:
                break
            if self.version.get(a) != va or self.version.get(b) != vb:
                continue
            keep = self.merge(a, b, stage, c)
            for k in self.shared[keep]:
                heapq.heappush(heap, entry(keep, k))

    def find(self, i):
        while self.parent[i] != i:
            i = self.parent[i]
        return i


def merge_regions(g: RegionGraph, cfg: MergeConfig = MergeConfig()) -> MergeResult:
    """Run both merge stages, keeping the full merge log."""
    agg = _Agglomerator(g)
    agg.run_stage(1, agg.color_dist, cfg.stage1_color_thresh)
    agg.run_stage(2, lambda i, j: agg.score(i, j, cfg.stage2_weights), cfg.stage2_score_thresh)
    n = len(g.regions)
    root = np.array([agg.find(i) for i in range(n)], dtype=np.int64)
    # survivors are the smallest id of their group, so sorting roots preserves input order
    uniq, inv = np.unique(root[g.labels.labels], return_inverse=True)
    return MergeResult(LabelMap(inv.reshape(g.labels.labels.shape).astype(np.int32), len(uniq)), agg.events, n)


def hierarchical_merge(g: RegionGraph, cfg: MergeConfig = MergeConfig()) -> LabelMap:
    return merge_regions(g, cfg).labels


def select_text_segments(merged: LabelMap, seed, cfg: SelectConfig = SelectConfig()) -> np.ndarray:
    """Union of the segments picked out by the seed mask.

    A segment is kept when at least ``overlap_thresh`` of it is covered by
    the seed, or when it holds at least ``component_share`` of some
    4-connected seed component of ``min_component_pixels`` or more.
    """
    seed = as_mask(seed)
    labels = np.asarray(merged.labels)
    if labels.shape != seed.shape:
        raise DimensionMismatch(f"segments {labels.shape} vs seed {seed.shape}")
    if seed.sum() < max(1, cfg.min_seed_pixels):
        return np.zeros(seed.shape, dtype=bool)
    n = merged.n_segments
    flat = labels.ravel()
    sflat = seed.ravel()
    seg_size = np.bincount(flat, minlength=n)
    seg_hit = np.bincount(flat[sflat], minlength=n)
    chosen = seg_hit >= cfg.overlap_thresh * seg_size

    comp, n_comp = ndimage.label(seed, structure=FOUR_CONNECTED)
    if n_comp:
        cflat = comp.ravel()[sflat] - 1
        comp_size = np.bincount(cflat, minlength=n_comp)
        pair, joint = np.unique(cflat.astype(np.int64) * n + flat[sflat], return_counts=True)
        c_of, s_of = np.divmod(pair, n)
        holds = (joint >= cfg.component_share * comp_size[c_of]) & (comp_size[c_of] >= cfg.min_component_pixels)
        chosen[s_of[holds]] = True
    chosen &= seg_size > 0
    return chosen[labels]


def finalize_mask(selected, cfg: SelectConfig = SelectConfig()) -> np.ndarray:
    m = as_mask(selected)
    r = cfg.final_dilate_radius
    if r == 0 or not m.any():
        return m.copy()
    # clip the element for rasters thinner than it; the result is the same square dilation
    if min(m.shape) < 2 * r + 1:
        pad = 2 * r + 1
        big = np.pad(m, pad)
        return dilate(big, StructuringElement("square", r))[pad:-pad, pad:-pad]
    return dilate(m, StructuringElement("square", r))


@dataclass
class MrfOutput:
    mask: np.ndarray
    seed: SeedResult
    superpixels: LabelMap
    merged: LabelMap
    selection: np.ndarray
    merge_events: list[MergeEvent] = field(default_factory=list)


def run_mrf(
    img,
    initial_mask,
    refine: RefineConfig = RefineConfig(),
    slic_params: SlicParams = SlicParams(),
    merge: MergeConfig = MergeConfig(),
    select: SelectConfig = SelectConfig(),
    threads: int = 1,
) -> MrfOutput:
    """Refine an initial text mask against the image it annotates."""
    initial = as_mask(initial_mask)
    check_same_size(np.asarray(img), initial, "image and initial mask")

    def stage(name, fn, *args):
        try:
            return fn(*args)
        except Exception as exc:
            raise StageError(name, exc) from exc

    seed = stage("refine_seed", refine_seed, initial, refine)
    lab = stage("rgb_to_lab", rgb_to_lab, img)
    sp = stage("slic", lambda: slic(lab, slic_params, threads))
    graph = stage("build_region_graph", build_region_graph, sp, lab)
    merged = stage("hierarchical_merge", merge_regions, graph, merge)
    selection = stage("select_text_segments", select_text_segments, merged.labels, seed.seed, select)
    final = stage("finalize_mask", finalize_mask, selection, select)
    return MrfOutput(final, seed, sp, merged.labels, selection, merged.events)
