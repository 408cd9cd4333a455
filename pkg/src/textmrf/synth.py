"""Synthetic stroke-on-texture scenes with known stroke masks.

Used by the test-suite and handy for exercising the refinement pipeline
without a dataset on disk.
"""
from __future__ import annotations

import numpy as np
from PIL import Image, ImageDraw

from .morphref import StructuringElement, dilate


def _texture(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size] / size
    base = rng.uniform(150, 230, 3)
    tilt = rng.uniform(-35, 35, (2, 3))
    img = base + yy[..., None] * tilt[0] + xx[..., None] * tilt[1]
    freq = rng.uniform(4, 12)
    angle = rng.uniform(0, np.pi)
    wave = np.sin(2 * np.pi * freq * (np.cos(angle) * xx + np.sin(angle) * yy))
    img = img + rng.uniform(3, 8) * wave[..., None]
    img = img + rng.normal(0, rng.uniform(2, 6), img.shape)
    return img


def make_fixture(seed: int, size: int = 512, n_strokes: int | None = None):
    """Return ``(rgb, stroke_mask)`` for one synthetic scene."""
    rng = np.random.default_rng(seed)
    bg = _texture(rng, size)
    canvas = Image.new("L", (size, size), 0)
    draw = ImageDraw.Draw(canvas)
    n = n_strokes if n_strokes is not None else int(rng.integers(6, 12))
    scale = size / 512
    for _ in range(n):
        width = max(2, int(round(rng.uniform(6, 14) * scale)))
        kind = rng.integers(0, 3)
        cx, cy = rng.uniform(0.1, 0.9, 2) * size
        span = rng.uniform(40, 140) * scale
        if kind == 0:
            pts = [(cx, cy)]
            for _ in range(int(rng.integers(1, 4))):
                ang = rng.uniform(0, 2 * np.pi)
                cx = float(np.clip(cx + span * np.cos(ang), 0, size - 1))
                cy = float(np.clip(cy + span * np.sin(ang), 0, size - 1))
                pts.append((cx, cy))
            draw.line(pts, fill=255, width=width, joint="curve")
        elif kind == 1:
            box = [cx - span / 2, cy - span / 3, cx + span / 2, cy + span / 3]
            start = float(rng.uniform(0, 360))
            draw.arc(box, start, start + float(rng.uniform(120, 300)), fill=255, width=width)
        else:
            r = span / 3
            draw.ellipse([cx - r, cy - r, cx + r, cy + r], outline=255, width=width)
    strokes = np.array(canvas) > 0

    ink = rng.uniform(10, 90, 3)
    if rng.random() < 0.5:
        # light text on a darkened background
        bg = bg - 110
        ink = rng.uniform(200, 250, 3)
    ink_tex = ink + rng.normal(0, 3, bg.shape)
    img = np.where(strokes[..., None], ink_tex, bg)
    rgb = np.clip(np.round(img), 0, 255).astype(np.uint8)
    return rgb, strokes


def corrupt_mask(mask: np.ndarray, seed: int, grow: int = 5, flip_frac: float = 0.10) -> np.ndarray:
    """Imitate a sloppy detector: dilate by ``grow`` pixels, then flip a fraction of all pixels."""
    rng = np.random.default_rng(seed)
    out = dilate(mask, StructuringElement("square", grow)) if grow > 0 else mask.copy()
    flip = rng.random(out.shape) < flip_frac
    return out ^ flip
