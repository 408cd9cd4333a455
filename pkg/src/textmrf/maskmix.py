"""Training-mask sampler mixing box, coarse-stroke and detailed-stroke masks.

Each draw picks a category with the configured probabilities, then one mask
uniformly from that category. Draw ``n`` of a stream is a pure function of
``(seed, n)``: the generator is PCG64 seeded from ``SeedSequence([seed, n])``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Union

import numpy as np

from .errors import EmptyCorpus, RatioInvalid
from .imagecore import as_mask, as_rgb, check_same_size, load_mask

log = logging.getLogger(__name__)

PRNG_ALGORITHM = "PCG64"
CATEGORIES = ("box", "coarse", "detailed")

MaskRef = Union[str, Path, np.ndarray]


@dataclass(frozen=True)
class MixRatios:
    p_box: float = 0.20
    p_coarse: float = 0.30
    p_detailed: float = 0.50

    def __post_init__(self):
        ps = self.as_tuple()
        if min(ps) < 0 or abs(sum(ps) - 1.0) > 1e-9:
            raise RatioInvalid(f"ratios must be non-negative and sum to 1, got {ps}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p_box, self.p_coarse, self.p_detailed)


@dataclass
class MaskCorpus:
    box_masks: list[MaskRef] = field(default_factory=list)
    coarse_masks: list[MaskRef] = field(default_factory=list)
    detailed_masks: list[MaskRef] = field(default_factory=list)

    def lists(self):
        return (self.box_masks, self.coarse_masks, self.detailed_masks)

    @classmethod
    def from_json(cls, path) -> "MaskCorpus":
        """Read ``{"root": ..., "box": [...], "coarse": [...], "detailed": [...]}``.

        Relative entries resolve against ``root``, itself relative to the
        manifest's directory when not absolute.
        """
        path = Path(path)
        doc = json.loads(path.read_text(encoding="utf-8"))
        root = Path(doc.get("root", "."))
        if not root.is_absolute():
            root = path.parent / root
        unknown = set(doc) - {"root", *CATEGORIES}
        if unknown:
            raise ValueError(f"unknown corpus keys: {sorted(unknown)}")
        return cls(*[[root / p for p in doc.get(cat, [])] for cat in CATEGORIES])


@dataclass(frozen=True)
class SamplerState:
    rng_seed: int = 0
    draw_count: int = 0


def effective_ratios(corpus: MaskCorpus, ratios: MixRatios) -> np.ndarray:
    """Ratios with empty categories zeroed and the rest renormalized."""
    p = np.array(ratios.as_tuple(), dtype=np.float64)
    present = np.array([len(lst) > 0 for lst in corpus.lists()])
    if not present.any():
        raise EmptyCorpus("all mask categories are empty")
    p = np.where(present, p, 0.0)
    if p.sum() <= 0:
        raise EmptyCorpus("every non-empty category has zero probability")
    if not present.all():
        log.info("renormalizing mix ratios over non-empty categories %s",
                 [c for c, ok in zip(CATEGORIES, present) if ok])
    return p / p.sum()


def _rng(state: SamplerState) -> np.random.Generator:
    ss = np.random.SeedSequence([state.rng_seed & 0xFFFFFFFFFFFFFFFF, state.draw_count])
    return np.random.Generator(np.random.PCG64(ss))


def draw_ref(corpus: MaskCorpus, ratios: MixRatios, state: SamplerState):
    """Pick ``(category, index)`` for the next draw without loading anything."""
    p = effective_ratios(corpus, ratios)
    rng = _rng(state)
    u = rng.random()
    cat = int(np.searchsorted(np.cumsum(p), u, side="right"))
    cat = min(cat, 2)
    while p[cat] == 0:
        cat -= 1  # only reachable through rounding at the top of the cumulative sum
    idx = int(rng.integers(len(corpus.lists()[cat])))
    return CATEGORIES[cat], idx, replace(state, draw_count=state.draw_count + 1)


def sample_mask(corpus: MaskCorpus, ratios: MixRatios, state: SamplerState):
    """Return ``(mask, category, next_state)``."""
    tag, idx, nxt = draw_ref(corpus, ratios, state)
    ref = corpus.lists()[CATEGORIES.index(tag)][idx]
    mask = as_mask(ref).copy() if isinstance(ref, np.ndarray) else load_mask(ref)
    return mask, tag, nxt


def compose_reference(img, mask, polarity: str = "keep_background") -> np.ndarray:
    """Zero out the masked pixels (``keep_background``) or everything else (``keep_region``)."""
    rgb = as_rgb(img)
    m = as_mask(mask)
    check_same_size(rgb, m, "compose_reference")
    if polarity == "keep_background":
        keep = ~m
    elif polarity == "keep_region":
        keep = m
    else:
        raise ValueError(f"unknown polarity {polarity!r}")
    return rgb * keep[..., None].astype(np.uint8)
