"""Binary morphology and iterative seed refinement of an initial text mask."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MaskTooSmall
from .imagecore import as_mask


@dataclass(frozen=True)
class StructuringElement:
    shape: str = "cross"
    radius: int = 1

    def __post_init__(self):
        if self.shape not in ("cross", "square"):
            raise ValueError(f"unknown element shape {self.shape!r}")
        if self.radius < 0:
            raise ValueError("element radius must be >= 0")

    def offsets(self) -> list[tuple[int, int]]:
        r = self.radius
        if self.shape == "square":
            return [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1)]
        return [(0, 0)] + [(d, 0) for d in range(-r, r + 1) if d] + [(0, d) for d in range(-r, r + 1) if d]


@dataclass(frozen=True)
class RefineConfig:
    iterations: int = 2
    upsample_factor: float = 2.0
    element: StructuringElement = field(default_factory=StructuringElement)
    binarize_threshold: float = 0.5

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.upsample_factor > 1.0:
            raise ValueError("upsample_factor must be > 1")
        if not 0.0 < self.binarize_threshold < 1.0:
            raise ValueError("binarize_threshold must lie in (0, 1)")


@dataclass(frozen=True)
class SeedResult:
    seed: np.ndarray
    # one mask per iteration ("erosion1", "erosion2", ...); the last equals seed
    intermediates: list[np.ndarray]


def _check_size(mask: np.ndarray, se: StructuringElement) -> None:
    need = 2 * se.radius + 1
    if mask.shape[0] < need or mask.shape[1] < need:
        raise MaskTooSmall(
            f"mask {mask.shape[1]}x{mask.shape[0]} smaller than {need}x{need} element"
        )


def _shifted(padded: np.ndarray, r: int, dy: int, dx: int, h: int, w: int) -> np.ndarray:
    return padded[r + dy : r + dy + h, r + dx : r + dx + w]


def erode(mask, se: StructuringElement = StructuringElement()) -> np.ndarray:
    """Pixels whose whole element neighborhood is set; outside the raster counts as unset."""
    m = as_mask(mask)
    _check_size(m, se)
    r = se.radius
    if r == 0:
        return m.copy()
    h, w = m.shape
    padded = np.pad(m, r, constant_values=False)
    out = np.ones_like(m)
    for dy, dx in se.offsets():
        out &= _shifted(padded, r, dy, dx, h, w)
    return out


def dilate(mask, se: StructuringElement = StructuringElement()) -> np.ndarray:
    m = as_mask(mask)
    _check_size(m, se)
    r = se.radius
    if r == 0:
        return m.copy()
    h, w = m.shape
    padded = np.pad(m, r, constant_values=False)
    out = np.zeros_like(m)
    for dy, dx in se.offsets():
        out |= _shifted(padded, r, dy, dx, h, w)
    return out


def _axis_weights(n_in: int, n_out: int):
    # half-pixel aligned sampling positions, clamped at the edges
    scale = n_in / n_out
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = src - i0
    return i0, i1, frac


def bilinear(values: np.ndarray, target_w: int, target_h: int) -> np.ndarray:
    """Bilinear resampling of a 2-D float field."""
    f = np.asarray(values, dtype=np.float64)
    h, w = f.shape
    y0, y1, fy = _axis_weights(h, target_h)
    x0, x1, fx = _axis_weights(w, target_w)
    fy = fy[:, None]
    fx = fx[None, :]
    top = f[y0][:, x0] * (1.0 - fx) + f[y0][:, x1] * fx
    bot = f[y1][:, x0] * (1.0 - fx) + f[y1][:, x1] * fx
    return top * (1.0 - fy) + bot * fy


def resample_mask(mask, target_w: int, target_h: int, binarize_threshold: float = 0.5) -> np.ndarray:
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be >= 1")
    m = as_mask(mask)
    return bilinear(m.astype(np.float64), target_w, target_h) >= binarize_threshold


def refine_seed(initial, cfg: RefineConfig = RefineConfig()) -> SeedResult:
    """Repeatedly upsample, erode and downsample the initial mask.

    Eroding at the upsampled resolution removes roughly half a pixel of the
    original mask per iteration, which thins stroke masks while keeping
    their skeleton.
    """
    m = as_mask(initial)
    h, w = m.shape
    up_w = max(1, int(round(w * cfg.upsample_factor)))
    up_h = max(1, int(round(h * cfg.upsample_factor)))
    stages = []
    cur = m
    for _ in range(cfg.iterations):
        up = resample_mask(cur, up_w, up_h, cfg.binarize_threshold)
        up = erode(up, cfg.element)
        cur = resample_mask(up, w, h, cfg.binarize_threshold)
        stages.append(cur)
    return SeedResult(seed=cur, intermediates=stages)
