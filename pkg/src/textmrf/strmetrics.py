"""Text-removal image quality metrics: PSNR, MSSIM, MSE, AGE, pEPs, pCEPs.

AGE, pEPs and pCEPs compare BT.601 grayscale versions of the two images. A
pixel is an error pixel when its absolute gray difference exceeds
``ep_threshold``; a clustered error pixel additionally has all four
4-neighbors in error.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EmptyDataset, ImageTooSmall, TextMrfError
from .imagecore import as_rgb, load_rgb, rgb_to_gray

COLUMNS = ("psnr", "mssim", "mse", "age", "peps", "pceps")
HEADERS = ("PSNR", "MSSIM", "MSE", "AGE", "pEPs", "pCEPs")


@dataclass(frozen=True)
class MetricConfig:
    ep_threshold: int = 20
    ssim_window: int = 11
    ssim_sigma: float = 1.5
    psnr_cap: float = 100.0

    def __post_init__(self):
        if not 1 <= self.ep_threshold <= 254:
            raise ValueError("ep_threshold must lie in [1, 254]")
        if self.ssim_window < 1 or self.ssim_window % 2 == 0:
            raise ValueError("ssim_window must be a positive odd size")


@dataclass(frozen=True)
class MetricValues:
    psnr: float
    mssim: float
    mse: float
    age: float
    peps: float
    pceps: float

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, c) for c in COLUMNS)


@dataclass
class MetricsReport:
    per_pair: list[tuple[str, MetricValues]]
    aggregate: MetricValues | None
    failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def pair_count(self) -> int:
        return len(self.per_pair)


def _pair(pred, gt):
    a = as_rgb(pred)
    b = as_rgb(gt)
    if a.shape != b.shape:
        raise DimensionMismatch(f"prediction {a.shape[1]}x{a.shape[0]} vs ground truth {b.shape[1]}x{b.shape[0]}")
    return a, b


def _mse_8bit(a: np.ndarray, b: np.ndarray) -> float:
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(d * d))


def psnr(pred, gt, cfg: MetricConfig = MetricConfig()) -> float:
    a, b = _pair(pred, gt)
    mse = _mse_8bit(a, b)
    if mse == 0:
        return cfg.psnr_cap
    return 10.0 * math.log10(255.0**2 / mse)


def mse_percent(pred, gt) -> float:
    a, b = _pair(pred, gt)
    d = (a.astype(np.float64) - b.astype(np.float64)) / 255.0
    return float(np.mean(d * d)) * 100.0


def _valid_filter(img: np.ndarray, g1: np.ndarray) -> np.ndarray:
    # separable correlation over valid positions only
    n = len(g1)
    h, w = img.shape
    rows = sum(g1[k] * img[:, k : w - n + 1 + k] for k in range(n))
    return sum(g1[k] * rows[k : h - n + 1 + k, :] for k in range(n))


def ssim_map(gray_a: np.ndarray, gray_b: np.ndarray, cfg: MetricConfig = MetricConfig()) -> np.ndarray:
    """Local SSIM at every valid window position of two gray images."""
    x = np.asarray(gray_a, dtype=np.float64)
    y = np.asarray(gray_b, dtype=np.float64)
    n = cfg.ssim_window
    if x.shape[0] < n or x.shape[1] < n:
        raise ImageTooSmall(f"SSIM needs at least {n}x{n} pixels, got {x.shape[1]}x{x.shape[0]}")
    g1 = np.exp(-((np.arange(n) - (n - 1) / 2.0) ** 2) / (2.0 * cfg.ssim_sigma**2))
    g1 /= g1.sum()
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2
    mx = _valid_filter(x, g1)
    my = _valid_filter(y, g1)
    sxx = _valid_filter(x * x, g1) - mx * mx
    syy = _valid_filter(y * y, g1) - my * my
    sxy = _valid_filter(x * y, g1) - mx * my
    return ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))


def mssim(pred, gt, cfg: MetricConfig = MetricConfig()) -> float:
    a, b = _pair(pred, gt)
    return _mssim_gray(rgb_to_gray(a), rgb_to_gray(b), cfg)


def _mssim_gray(ga, gb, cfg) -> float:
    if np.array_equal(ga, gb):
        if ga.shape[0] < cfg.ssim_window or ga.shape[1] < cfg.ssim_window:
            raise ImageTooSmall(f"SSIM needs at least {cfg.ssim_window}x{cfg.ssim_window} pixels")
        return 100.0
    return float(ssim_map(ga, gb, cfg).mean()) * 100.0


def _gray_diff(pred, gt) -> np.ndarray:
    a, b = _pair(pred, gt)
    return np.abs(rgb_to_gray(a).astype(np.int16) - rgb_to_gray(b).astype(np.int16))


def age(pred, gt) -> float:
    return float(_gray_diff(pred, gt).mean())


def peps(pred, gt, cfg: MetricConfig = MetricConfig()) -> float:
    return float((_gray_diff(pred, gt) > cfg.ep_threshold).mean())


def clustered_errors(err: np.ndarray) -> np.ndarray:
    """Error pixels whose four 4-neighbors are all errors; border pixels never qualify."""
    out = np.zeros_like(err)
    out[1:-1, 1:-1] = (
        err[1:-1, 1:-1] & err[:-2, 1:-1] & err[2:, 1:-1] & err[1:-1, :-2] & err[1:-1, 2:]
    )
    return out


def _pceps_err(err: np.ndarray) -> float:
    if err.shape[0] < 3 or err.shape[1] < 3:
        raise ImageTooSmall("pCEPs needs at least 3x3 pixels")
    return float(clustered_errors(err).mean())


def pceps(pred, gt, cfg: MetricConfig = MetricConfig()) -> float:
    return _pceps_err(_gray_diff(pred, gt) > cfg.ep_threshold)


def evaluate_pair(pred, gt, cfg: MetricConfig = MetricConfig()) -> MetricValues:
    """All six metrics, sharing the grayscale conversion."""
    a, b = _pair(pred, gt)
    mse8 = _mse_8bit(a, b)
    ga = rgb_to_gray(a)
    gb = rgb_to_gray(b)
    diff = np.abs(ga.astype(np.int16) - gb.astype(np.int16))
    err = diff > cfg.ep_threshold
    return MetricValues(
        psnr=cfg.psnr_cap if mse8 == 0 else 10.0 * math.log10(255.0**2 / mse8),
        mssim=_mssim_gray(ga, gb, cfg),
        mse=mse_percent(a, b),
        age=float(diff.mean()),
        peps=float(err.mean()),
        pceps=_pceps_err(err),
    )


def aggregate(rows: list[MetricValues]) -> MetricValues:
    arr = np.array([r.as_tuple() for r in rows], dtype=np.float64)
    return MetricValues(*(float(v) for v in arr.mean(axis=0)))


def _pair_id(item) -> tuple[str, Path, Path]:
    if len(item) == 3:
        pid, p, g = item
        return str(pid), Path(p), Path(g)
    p, g = item
    return Path(p).stem, Path(p), Path(g)


def evaluate_dataset(pairs, cfg: MetricConfig = MetricConfig(), threads: int = 1) -> MetricsReport:
    """Evaluate ``(pred_path, gt_path)`` or ``(id, pred_path, gt_path)`` items.

    Failed pairs are listed in ``report.failures`` and left out of the
    aggregate; row order follows the input.
    """
    items = [_pair_id(item) for item in pairs]
    if not items:
        raise EmptyDataset("no pairs to evaluate")

    def one(item):
        pid, p, g = item
        try:
            return pid, evaluate_pair(load_rgb(p), load_rgb(g), cfg), None
        except TextMrfError as exc:
            return pid, None, f"{type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(it) for it in items]
    rows = [(pid, v) for pid, v, _ in results if v is not None]
    failures = [(pid, err) for pid, _, err in results if err is not None]
    agg = aggregate([v for _, v in rows]) if rows else None
    return MetricsReport(rows, agg, failures)


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def report_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["pair_id", *COLUMNS, "status"])
    for pid, v in report.per_pair:
        w.writerow([pid, *(_fmt(x) for x in v.as_tuple()), "ok"])
    for pid, err in report.failures:
        w.writerow([pid, *([""] * len(COLUMNS)), err])
    if report.aggregate is not None:
        w.writerow(["aggregate", *(_fmt(x) for x in report.aggregate.as_tuple()), f"n={report.pair_count}"])
    return buf.getvalue()


def report_table(report: MetricsReport) -> str:
    """Aligned plain-text table, one row per pair plus the mean."""
    body = [[pid, *(_fmt(x) for x in v.as_tuple())] for pid, v in report.per_pair]
    if report.aggregate is not None:
        body.append(["mean", *(_fmt(x) for x in report.aggregate.as_tuple())])
    head = ["pair", *HEADERS]
    widths = [max(len(r[i]) for r in [head, *body]) for i in range(len(head))]
    lines = ["  ".join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(r)) for r in [head, *body]]
    lines.insert(1, "-" * len(lines[0]))
    for pid, err in report.failures:
        lines.append(f"FAILED {pid}: {err}")
    return "\n".join(lines) + "\n"

