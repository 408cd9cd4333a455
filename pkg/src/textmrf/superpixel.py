"""SLIC superpixels over CIELAB + xy, with connectivity enforcement."""
from __future__ import annotations

import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import InvalidK

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class SlicParams:
    k: int = 400
    compactness_m: float = 10.0
    max_iters: int = 10
    min_region_frac: float = 0.25

    def __post_init__(self):
        if self.k < 1:
            raise InvalidK("k must be >= 1")
        if not self.compactness_m > 0:
            raise ValueError("compactness_m must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.min_region_frac < 0:
            raise ValueError("min_region_frac must be >= 0")


@dataclass(frozen=True)
class LabelMap:
    labels: np.ndarray  # int32, (H, W), values in [0, n_segments)
    n_segments: int

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.n_segments)


@dataclass
class SlicTrace:
    """Raw clustering state before connectivity enforcement."""

    labels: np.ndarray
    centers: np.ndarray  # (n, 5): L, a, b, y, x
    spacing: float
    energies: list[float] = field(default_factory=list)
    iterations: int = 0


def grid_shape(height: int, width: int, k: int) -> tuple[int, int]:
    """(rows, cols) of the initial center grid, rows * cols close to k."""
    ny = max(1, int(round(math.sqrt(k * height / width))))
    ny = min(ny, height)
    nx = max(1, int(round(k / ny)))
    nx = min(nx, width)
    return ny, nx


def _gradient(lab: np.ndarray) -> np.ndarray:
    p = np.pad(lab, ((1, 1), (1, 1), (0, 0)), mode="edge")
    dx = p[1:-1, 2:] - p[1:-1, :-2]
    dy = p[2:, 1:-1] - p[:-2, 1:-1]
    return (dx * dx).sum(axis=2) + (dy * dy).sum(axis=2)


def initial_centers(lab: np.ndarray, k: int) -> np.ndarray:
    """Grid-seeded centers moved to the lowest-gradient pixel of their 3x3 neighborhood."""
    h, w = lab.shape[:2]
    ny, nx = grid_shape(h, w, k)
    grad = _gradient(lab)
    centers = []
    for j in range(ny):
        cy = int((j + 0.5) * h / ny)
        for i in range(nx):
            cx = int((i + 0.5) * w / nx)
            by, bx = cy, cx
            best = grad[cy, cx]
            for yy in range(max(0, cy - 1), min(h, cy + 2)):
                for xx in range(max(0, cx - 1), min(w, cx + 2)):
                    if grad[yy, xx] < best:
                        best = grad[yy, xx]
                        by, bx = yy, xx
            centers.append((*lab[by, bx], float(by), float(bx)))
    return np.array(centers, dtype=np.float64)


def _sq_dist(L, a, b, y, x, c, wxy):
    # must stay bit-identical between the windowed and gathered call sites
    dl = L - c[0]
    da = a - c[1]
    db = b - c[2]
    dy = y - c[3]
    dx = x - c[4]
    return (dl * dl + da * da + db * db) + wxy * (dy * dy + dx * dx)


class _Planes:
    def __init__(self, lab: np.ndarray):
        h, w = lab.shape[:2]
        self.L = np.ascontiguousarray(lab[..., 0])
        self.a = np.ascontiguousarray(lab[..., 1])
        self.b = np.ascontiguousarray(lab[..., 2])
        self.y, self.x = np.mgrid[0:h, 0:w].astype(np.float64)
        self.shape = (h, w)

    def window_dist(self, c, S, wxy):
        h, w = self.shape
        y0 = max(0, int(math.floor(c[3] - S)))
        y1 = min(h, int(math.ceil(c[3] + S)) + 1)
        x0 = max(0, int(math.floor(c[4] - S)))
        x1 = min(w, int(math.ceil(c[4] + S)) + 1)
        sl = (slice(y0, y1), slice(x0, x1))
        d = _sq_dist(self.L[sl], self.a[sl], self.b[sl], self.y[sl], self.x[sl], c, wxy)
        return sl, d

    def gathered_dist(self, centers, labels, wxy):
        c = centers[labels]
        return _sq_dist(self.L, self.a, self.b, self.y, self.x, c.transpose(2, 0, 1), wxy)


def _assign_chunk(planes: _Planes, centers: np.ndarray, idx: range, S: float, wxy: float):
    best = np.full(planes.shape, np.inf)
    lbl = np.full(planes.shape, -1, dtype=np.int32)
    for i in idx:
        sl, d = planes.window_dist(centers[i], S, wxy)
        bsl = best[sl]
        better = d < bsl
        bsl[better] = d[better]
        lbl[sl][better] = i
    return best, lbl


def _assign(planes, centers, labels, S, wxy, threads):
    n = len(centers)
    threads = max(1, min(threads, n))
    bounds = np.linspace(0, n, threads + 1).astype(int)
    chunks = [range(bounds[t], bounds[t + 1]) for t in range(threads)]
    if threads == 1:
        results = [_assign_chunk(planes, centers, chunks[0], S, wxy)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: _assign_chunk(planes, centers, r, S, wxy), chunks))
    # chunks hold increasing center indices; strict < keeps the lowest index on ties
    best, new = results[0]
    for b, l in results[1:]:
        better = b < best
        best[better] = b[better]
        new[better] = l[better]

    if labels is not None:
        # a pixel keeps its center when that center moved out of window range and is still nearer
        cur = planes.gathered_dist(centers, labels, wxy)
        keep = cur < best
        best[keep] = cur[keep]
        new[keep] = labels[keep]

    missing = new < 0
    if missing.any():
        ys, xs = np.nonzero(missing)
        for yy, xx in zip(ys, xs):
            px = (planes.L[yy, xx], planes.a[yy, xx], planes.b[yy, xx], float(yy), float(xx))
            d = _sq_dist(*px, centers.T, wxy)
            j = int(np.argmin(d))
            new[yy, xx] = j
            best[yy, xx] = d[j]
    return new


def _update(planes, labels, centers):
    n = len(centers)
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=n).astype(np.float64)
    sums = np.stack(
        [np.bincount(flat, weights=p.ravel(), minlength=n) for p in (planes.L, planes.a, planes.b, planes.y, planes.x)],
        axis=1,
    )
    new = centers.copy()
    nz = counts > 0
    new[nz] = sums[nz] / counts[nz, None]
    return new


def slic_iterate(lab: np.ndarray, params: SlicParams = SlicParams(), threads: int = 1) -> SlicTrace:
    """Run the localized k-means loop and record the objective after every iteration.

    The objective is the sum over pixels of the squared labxy distance to the
    assigned center. Assignment considers every center whose search window
    covers the pixel plus the pixel's current center, so the objective never
    increases.
    """
    lab = np.asarray(lab, dtype=np.float64)
    if lab.ndim != 3 or lab.shape[2] != 3 or lab.shape[0] < 1 or lab.shape[1] < 1:
        raise ValueError(f"expected non-empty (H, W, 3) Lab image, got {lab.shape}")
    h, w = lab.shape[:2]
    n_px = h * w
    if params.k > n_px:
        raise InvalidK(f"k={params.k} exceeds pixel count {n_px}")
    S = math.sqrt(n_px / params.k)
    wxy = (params.compactness_m / S) ** 2
    planes = _Planes(lab)
    centers = initial_centers(lab, params.k)
    trace = SlicTrace(labels=None, centers=centers, spacing=S)
    labels = None
    for _ in range(max(1, params.max_iters)):
        labels = _assign(planes, centers, labels, S, wxy, threads)
        new_centers = _update(planes, labels, centers)
        moved = np.hypot(new_centers[:, 3] - centers[:, 3], new_centers[:, 4] - centers[:, 4])
        centers = new_centers
        trace.iterations += 1
        trace.energies.append(float(planes.gathered_dist(centers, labels, wxy).sum()))
        if moved.max(initial=0.0) < 0.5:
            break
    trace.labels = labels
    trace.centers = centers
    return trace


def slic(lab: np.ndarray, params: SlicParams = SlicParams(), threads: int = 1) -> LabelMap:
    trace = slic_iterate(lab, params, threads)
    raw = LabelMap(trace.labels.astype(np.int32), len(trace.centers))
    return enforce_connectivity(raw, lab, params.min_region_frac)


def _components(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Split every label into its 4-connected pieces; ids are arbitrary but dense."""
    comp = np.zeros(labels.shape, dtype=np.int64)
    n = 0
    for lbl, sl in enumerate(ndimage.find_objects(labels + 1)):
        if sl is None:
            continue
        sub = labels[sl] == lbl
        cc, k = ndimage.label(sub, structure=FOUR_CONNECTED)
        comp[sl][sub] = cc[sub] + (n - 1)
        n += k
    return comp, n


def relabel_dense(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Renumber labels 0..n-1 in order of first appearance in raster scan."""
    flat = labels.ravel()
    uniq, first, inv = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty(len(uniq), dtype=np.int32)
    rank[order] = np.arange(len(uniq), dtype=np.int32)
    return rank[inv].reshape(labels.shape), len(uniq)


def adjacent_pairs(labels: np.ndarray) -> np.ndarray:
    """Unique (i, j), i < j, of labels touching through a 4-neighbor step."""
    pairs = []
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        diff = a != b
        lo = np.minimum(a[diff], b[diff])
        hi = np.maximum(a[diff], b[diff])
        pairs.append(np.stack([lo, hi], axis=1))
    allp = np.concatenate(pairs) if pairs else np.zeros((0, 2), dtype=labels.dtype)
    if len(allp) == 0:
        return allp.reshape(0, 2)
    return np.unique(allp, axis=0)


def enforce_connectivity(lm: LabelMap, lab: np.ndarray, min_region_frac: float = 0.25) -> LabelMap:
    """Make every label a single 4-connected region and absorb small fragments.

    Fragments smaller than ``min_region_frac * S**2`` (S the grid spacing
    implied by the input segment count) join the adjacent region whose mean
    Lab color is nearest.
    """
    labels = np.asarray(lm.labels)
    lab = np.asarray(lab, dtype=np.float64)
    h, w = labels.shape
    comp, n = _components(labels)
    flat = comp.ravel()
    sizes = np.bincount(flat, minlength=n).astype(np.float64)
    means = np.stack([np.bincount(flat, weights=lab[..., c].ravel(), minlength=n) for c in range(3)], axis=1)
    means /= sizes[:, None]

    min_size = min_region_frac * (h * w) / max(1, lm.n_segments)
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for i, j in adjacent_pairs(comp):
        nbrs[i].add(int(j))
        nbrs[j].add(int(i))

    parent = np.arange(n)
    heap = [(sizes[i], i) for i in range(n) if sizes[i] < min_size]
    heapq.heapify(heap)
    while heap:
        sz, i = heapq.heappop(heap)
        if parent[i] != i or sz != sizes[i] or sizes[i] >= min_size or not nbrs[i]:
            continue
        cand = sorted(nbrs[i])
        d = ((means[cand] - means[i]) ** 2).sum(axis=1)
        j = cand[int(np.argmin(d))]
        total = sizes[i] + sizes[j]
        means[j] = (means[j] * sizes[j] + means[i] * sizes[i]) / total
        sizes[j] = total
        parent[i] = j
        for k in nbrs[i]:
            nbrs[k].discard(i)
            if k != j:
                nbrs[k].add(j)
                nbrs[j].add(k)
        nbrs[j].discard(i)
        nbrs[i] = set()
        if sizes[j] < min_size:
            heapq.heappush(heap, (sizes[j], j))

    # resolve chains of absorptions
    root = parent.copy()
    while True:
        nxt = root[root]
        if np.array_equal(nxt, root):
            break
        root = nxt
    out, n_out = relabel_dense(root[comp])
    return LabelMap(out.astype(np.int32), n_out)


def boundary_length(labels: np.ndarray) -> int:
    """Number of 4-adjacent pixel pairs with different labels."""
    return int((labels[:, :-1] != labels[:, 1:]).sum() + (labels[:-1, :] != labels[1:, :]).sum())


def save_label_map(path, lm: LabelMap) -> None:
    """Write labels as a 16-bit grayscale PNG (diagnostic output only)."""
    if lm.n_segments > 65536:
        raise ValueError("too many segments for a 16-bit PNG")
    Image.fromarray(lm.labels.astype(np.uint16)).save(Path(path), format="PNG")


def load_label_map(path) -> LabelMap:
    arr = np.array(Image.open(Path(path))).astype(np.int32)
    out, n = relabel_dense(arr)
    return LabelMap(out, n)
