"""Raster conventions, image I/O and per-pixel color transforms.

Images are plain numpy arrays:

* RGB image: ``uint8`` array of shape ``(H, W, 3)``, sRGB.
* gray image: ``uint8`` array of shape ``(H, W)``.
* Lab image: ``float64`` array of shape ``(H, W, 3)`` holding CIELAB (D65).
* binary mask: ``bool`` array of shape ``(H, W)``, ``True`` marks text.

Masks are stored on disk as 8-bit PNG with values 0 and 255.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, DimensionMismatch, NotFound

# BT.601 luma
GRAY_WEIGHTS = (0.299, 0.587, 0.114)

# sRGB primaries, D65 reference white
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
D65_WHITE = (0.95047, 1.0, 1.08883)

_LAB_EPS = 216.0 / 24389.0
_LAB_KAPPA = 24389.0 / 27.0


def as_rgb(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 (H, W, 3) RGB array, got {arr.dtype} {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    return arr


def as_mask(mask) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"expected 2-D mask, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def check_same_size(a: np.ndarray, b: np.ndarray, what: str = "inputs") -> None:
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatch(f"{what}: {a.shape[1]}x{a.shape[0]} vs {b.shape[1]}x{b.shape[0]}")


def _open(path) -> Image.Image:
    path = Path(path)
    if not path.is_file():
        raise NotFound(str(path))
    try:
        im = Image.open(path)
        im.load()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    return im


def load_rgb(path) -> np.ndarray:
    """Decode a PNG or JPEG file into an RGB array."""
    im = _open(path)
    return np.array(im.convert("RGB"), dtype=np.uint8)


def load_gray(path) -> np.ndarray:
    im = _open(path)
    return np.array(im.convert("L"), dtype=np.uint8)


def load_mask(path) -> np.ndarray:
    return threshold(load_gray(path), 128)


def save_rgb(path, img) -> None:
    Image.fromarray(as_rgb(img), mode="RGB").save(Path(path), format="PNG")


def save_gray(path, img) -> None:
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="L").save(Path(path), format="PNG")


def save_mask(path, mask) -> None:
    save_gray(path, as_mask(mask).astype(np.uint8) * 255)


def image_size(path) -> tuple[int, int]:
    """(width, height) of an image file, decoding the full raster."""
    im = _open(path)
    return im.size


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def rgb_to_gray(img) -> np.ndarray:
    rgb = as_rgb(img).astype(np.float64)
    wr, wg, wb = GRAY_WEIGHTS
    g = _round_half_up(wr * rgb[..., 0] + wg * rgb[..., 1] + wb * rgb[..., 2])
    return np.clip(g, 0, 255).astype(np.uint8)


def rgb_to_lab(img) -> np.ndarray:
    """sRGB (8-bit) to CIELAB under D65."""
    c = as_rgb(img).astype(np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _RGB_TO_XYZ.T
    xyz /= np.asarray(D65_WHITE)
    f = np.where(xyz > _LAB_EPS, np.cbrt(xyz), (_LAB_KAPPA * xyz + 16.0) / 116.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def threshold(img, t: int) -> np.ndarray:
    """Binarize a gray image: true where intensity >= t."""
    if not 0 <= t <= 255:
        raise ValueError(f"threshold must lie in 0..255, got {t}")
    return np.asarray(img) >= t


def overlay(img, mask, color: Sequence[int] = (255, 0, 0), alpha: float = 0.5) -> np.ndarray:
    """Blend ``color`` into the masked pixels of ``img``."""
    rgb = as_rgb(img)
    m = as_mask(mask)
    check_same_size(rgb, m, "overlay")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    out = rgb.copy()
    col = np.asarray(color, dtype=np.float64).reshape(1, 3)
    src = rgb[m].astype(np.float64)
    out[m] = np.clip(_round_half_up((1.0 - alpha) * src + alpha * col), 0, 255).astype(np.uint8)
    return out


def resize_rgb(img, width: int, height: int) -> np.ndarray:
    im = Image.fromarray(as_rgb(img), mode="RGB")
    return np.array(im.resize((width, height), Image.BILINEAR), dtype=np.uint8)


def label_boundaries(labels: np.ndarray) -> np.ndarray:
    """Pixels whose right or lower 4-neighbor carries a different label."""
    b = np.zeros(labels.shape, dtype=bool)
    b[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    b[:-1, :] |= labels[:-1, :] != labels[1:, :]
    return b
