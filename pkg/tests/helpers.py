"""On-disk fixture sets shared by the CLI and acceptance tests."""
import numpy as np

from textmrf.dataset import PairEntry, PairManifest
from textmrf.imagecore import save_mask, save_rgb
from textmrf.synth import corrupt_mask, make_fixture


def write_fixture_set(root, n=3, size=256, with_masks=True):
    """Write ``n`` synthetic pairs plus a manifest; return the manifest path."""
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in range(n):
        rgb, gt = make_fixture(s, size)
        pid = f"fx{s:02d}"
        save_rgb(root / f"{pid}.png", rgb)
        # the "ground truth" for evaluation is a text-free image: blank out strokes
        clean = rgb.copy()
        clean[gt] = np.median(rgb.reshape(-1, 3), axis=0).astype(np.uint8)
        save_rgb(root / f"{pid}_gt.png", clean)
        mask_path = None
        if with_masks:
            mask_path = root / f"{pid}_mask.png"
            save_mask(mask_path, corrupt_mask(gt, 1000 + s))
        entries.append(PairEntry(pid, root / f"{pid}.png", root / f"{pid}_gt.png", mask_path))
    path = root / "manifest.json"
    PairManifest(root, entries).save(path)
    return path


def tree_bytes(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.is_file()}
