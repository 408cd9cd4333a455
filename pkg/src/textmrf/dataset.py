"""Paired-dataset manifests: discovery on disk, JSON round-trip, validation."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import NoPairsFound, RootMissing, TextMrfError
from .imagecore import image_size

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class PairEntry:
    id: str
    input_path: Path
    gt_path: Path
    initial_mask_path: Path | None = None


@dataclass
class PairManifest:
    root: Path
    entries: list[PairEntry]
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("manifest ids must be unique")

    def to_json(self) -> str:
        def rel(p: Path) -> str:
            try:
                return Path(p).relative_to(self.root).as_posix()
            except ValueError:
                return str(p)

        entries = []
        for e in self.entries:
            d = {"id": e.id, "input": rel(e.input_path), "gt": rel(e.gt_path)}
            if e.initial_mask_path is not None:
                d["mask"] = rel(e.initial_mask_path)
            entries.append(d)
        return json.dumps({"root": str(self.root), "entries": entries}, indent=2) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_json(cls, text: str, base: Path | None = None) -> "PairManifest":
        doc = json.loads(text)
        root = Path(doc.get("root", "."))
        if not root.is_absolute() and base is not None:
            root = base / root
        entries = []
        for d in doc["entries"]:
            mask = d.get("mask")
            entries.append(
                PairEntry(str(d["id"]), root / d["input"], root / d["gt"], root / mask if mask else None)
            )
        return cls(root, entries)

    @classmethod
    def load(cls, path) -> "PairManifest":
        path = Path(path)
        return cls.from_json(path.read_text(encoding="utf-8"), base=path.parent)


def _images(d: Path) -> dict[str, Path]:
    if not d.is_dir():
        return {}
    return {p.name: p for p in d.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES}


def scan_layout(root, layout: str = "flat_pairs") -> PairManifest:
    """Discover input/ground-truth pairs under ``root``.

    ``flat_pairs``: ``<id>.png`` next to ``<id>_gt.png`` (and optionally
    ``<id>_mask.png``). ``split_dirs``: identical file names under
    ``images/``, ``labels/`` and optionally ``masks/``.
    """
    root = Path(root)
    if not root.is_dir():
        raise RootMissing(str(root))
    warnings = []
    entries = []
    if layout == "flat_pairs":
        files = _images(root)
        stems = {Path(n).stem: p for n, p in files.items()}
        for stem, p in sorted(stems.items()):
            if stem.endswith("_gt") or stem.endswith("_mask"):
                continue
            gt = stems.get(stem + "_gt")
            if gt is None:
                warnings.append(f"no ground truth for {p.name}")
                continue
            entries.append(PairEntry(stem, p, gt, stems.get(stem + "_mask")))
        for stem, p in sorted(stems.items()):
            if stem.endswith("_gt") and stem[:-3] not in stems:
                warnings.append(f"ground truth without input: {p.name}")
    elif layout == "split_dirs":
        images = _images(root / "images")
        labels = _images(root / "labels")
        masks = _images(root / "masks")
        for name in sorted(images):
            if name not in labels:
                warnings.append(f"orphan image without label: images/{name}")
                continue
            entries.append(PairEntry(Path(name).stem, images[name], labels[name], masks.get(name)))
        for name in sorted(set(labels) - set(images)):
            warnings.append(f"orphan label without image: labels/{name}")
    else:
        raise ValueError(f"unknown layout {layout!r}")
    if not entries:
        raise NoPairsFound(f"no pairs under {root} ({layout})")
    entries.sort(key=lambda e: e.id)
    return PairManifest(root, entries, warnings)


@dataclass
class ValidationReport:
    checked: int
    failures: list[tuple[str, str, str]]  # (entry id, error kind, detail)

    @property
    def ok(self) -> bool:
        return not self.failures


def _check(entry: PairEntry) -> list[tuple[str, str, str]]:
    out = []
    sizes = {}
    for role, p in (("input", entry.input_path), ("gt", entry.gt_path), ("mask", entry.initial_mask_path)):
        if p is None:
            continue
        try:
            sizes[role] = image_size(p)
        except TextMrfError as exc:
            out.append((entry.id, type(exc).__name__, f"{role}: {exc}"))
    base = sizes.get("input")
    if base is not None:
        for role in ("gt", "mask"):
            if role in sizes and sizes[role] != base:
                out.append(
                    (entry.id, "DimensionMismatch", f"{role} {sizes[role][0]}x{sizes[role][1]} vs input {base[0]}x{base[1]}")
                )
    return out


def validate(manifest: PairManifest, threads: int = 1) -> ValidationReport:
    """Decode every referenced file and compare dimensions; never raises per entry."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per = list(pool.map(_check, manifest.entries))
    else:
        per = [_check(e) for e in manifest.entries]
    return ValidationReport(len(manifest.entries), [f for fs in per for f in fs])
