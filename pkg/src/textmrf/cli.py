"""Batch command line: refine, evaluate, sample-masks, overlay, validate, scan.

Exit status: 0 on full success, 2 when some entries failed, 1 on usage or
configuration errors. Warnings go to stderr, summaries and tables to stdout.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import imagecore as ic
from .config import ConfigError, build_configs, leaf_fields, load_config_file
from .dataset import PairManifest, scan_layout, validate
from .errors import TextMrfError
from .hfsmerge import run_mrf
from .maskmix import MaskCorpus, SamplerState, draw_ref
from .morphref import resample_mask
from .strmetrics import evaluate_dataset, report_csv, report_table
from .superpixel import save_label_map

log = logging.getLogger("textmrf")

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _typed(default):
    if isinstance(default, bool):
        def parse(s):
            if s.lower() in ("1", "true", "yes", "on"):
                return True
            if s.lower() in ("0", "false", "no", "off"):
                return False
            raise argparse.ArgumentTypeError(f"not a boolean: {s}")
        return parse
    return type(default)


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global")
    g.add_argument("--threads", type=int, default=1, help="worker count (default 1)")
    g.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    g.add_argument("--config", type=Path, help="JSON file overriding module defaults")
    c = p.add_argument_group("module settings (override --config)")
    for path, default in leaf_fields():
        c.add_argument(f"--{path}", dest=f"cfg:{path}", type=_typed(default), default=None,
                       metavar=type(default).__name__.upper(), help=f"default {default!r}")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="textmrf", description="Scene-text mask refinement and text-removal evaluation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("refine", parents=[common], help="refine initial masks for every manifest entry")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--emit-stages", action="store_true", help="also write per-stage PNGs and overlays")
    p.add_argument("--resize-to", type=int, metavar="N", help="work at N x N (e.g. 512)")

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against ground truth")
    p.add_argument("manifest", type=Path)
    p.add_argument("--pred-dir", type=Path, required=True, help="holds <id>.png per manifest entry")
    p.add_argument("--out-csv", type=Path, required=True)
    p.add_argument("--ep-threshold", dest="cfg:metrics.ep_threshold", type=int, default=None,
                   help="alias for --metrics.ep_threshold")

    p = sub.add_parser("sample-masks", parents=[common], help="draw a mixed training-mask stream")
    p.add_argument("corpus", type=Path, help='JSON: {"root", "box": [...], "coarse": [...], "detailed": [...]}')
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("overlay", parents=[common], help="blend a mask over an image")
    p.add_argument("image", type=Path)
    p.add_argument("mask", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--color", default="255,0,0", help="R,G,B (default 255,0,0)")
    p.add_argument("--alpha", type=float, default=0.5)

    p = sub.add_parser("validate", parents=[common], help="check that manifest files decode and sizes agree")
    p.add_argument("manifest", type=Path)

    p = sub.add_parser("scan", parents=[common], help="build a manifest from a directory layout")
    p.add_argument("root", type=Path)
    p.add_argument("--layout", choices=["flat_pairs", "split_dirs"], default="flat_pairs")
    p.add_argument("--out", type=Path, required=True)
    return parser


def _configs(args) -> dict:
    doc = load_config_file(args.config) if args.config else None
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg:") and v is not None}
    return build_configs(doc, overrides)


def _load_manifest(path) -> PairManifest:
    try:
        return PairManifest.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}") from exc


# ---- refine -------------------------------------------------------------

def _refine_entry(entry, cfgs, emit, resize_to):
    """Worker: returns ``(id, {file_suffix: array}, error)``."""
    try:
        img = ic.load_rgb(entry.input_path)
        init = ic.load_mask(entry.initial_mask_path)
        ic.check_same_size(img, init, f"{entry.id} image and mask")
        if resize_to:
            img = ic.resize_rgb(img, resize_to, resize_to)
            init = resample_mask(init, resize_to, resize_to, 0.5)
        out = run_mrf(img, init, cfgs["refine"], cfgs["slic"], cfgs["merge"], cfgs["select"])
    except TextMrfError as exc:
        return entry.id, None, f"{type(exc).__name__}: {exc}"
    files = {"_mrf.png": out.mask}
    if emit:
        inter = out.seed.intermediates
        files.update({
            "_stage1.png": init,
            "_stage2.png": inter[0],
            "_stage3.png": out.seed.seed,
            "_stage4.png": ic.overlay(img, ic.label_boundaries(out.superpixels.labels), (255, 0, 0), 1.0),
            "_stage5.png": ic.overlay(img, ic.label_boundaries(out.merged.labels), (0, 0, 255), 1.0),
            "_stage6.png": out.selection,
            "_overlay.png": ic.overlay(img, out.mask, (255, 0, 0), 0.5),
            "_slic_labels.png": out.superpixels,
        })
    return entry.id, files, None


def _write(path: Path, obj) -> None:
    if isinstance(obj, np.ndarray) and obj.dtype == bool:
        ic.save_mask(path, obj)
    elif isinstance(obj, np.ndarray):
        ic.save_rgb(path, obj)
    else:
        save_label_map(path, obj)


def _map(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            yield from pool.map(fn, items)
    else:
        yield from map(fn, items)


class _RefineJob:
    def __init__(self, cfgs, emit, resize_to):
        self.cfgs, self.emit, self.resize_to = cfgs, emit, resize_to

    def __call__(self, entry):
        return _refine_entry(entry, self.cfgs, self.emit, self.resize_to)


def cmd_refine(args) -> int:
    cfgs = _configs(args)
    manifest = _load_manifest(args.manifest)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    todo, skipped = [], 0
    for e in manifest.entries:
        if e.initial_mask_path is None:
            log.warning("%s: no initial mask in manifest, skipped", e.id)
            skipped += 1
        else:
            todo.append(e)
    failed = 0
    for eid, files, err in _map(_RefineJob(cfgs, args.emit_stages, args.resize_to), todo, args.threads):
        if err is not None:
            log.warning("%s: %s", eid, err)
            failed += 1
            continue
        for suffix, obj in files.items():
            _write(args.out_dir / f"{eid}{suffix}", obj)
    done = len(todo) - failed
    print(f"refine: {done} processed, {failed + skipped} failed")
    return EXIT_OK if failed + skipped == 0 else EXIT_PARTIAL


# ---- evaluate -----------------------------------------------------------

def cmd_evaluate(args) -> int:
    cfgs = _configs(args)
    manifest = _load_manifest(args.manifest)
    pairs = [(e.id, args.pred_dir / f"{e.id}.png", e.gt_path) for e in manifest.entries]
    report = evaluate_dataset(pairs, cfgs["metrics"], threads=args.threads)
    args.out_csv.parent.mkdir(parents=True, exist_ok=True)
    args.out_csv.write_text(report_csv(report), encoding="utf-8")
    table = report_table(report)
    args.out_csv.with_suffix(".txt").write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    for pid, err in report.failures:
        log.warning("%s: %s", pid, err)
    return EXIT_OK if not report.failures else EXIT_PARTIAL


# ---- sample-masks -------------------------------------------------------

def cmd_sample_masks(args) -> int:
    cfgs = _configs(args)
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    try:
        corpus = MaskCorpus.from_json(args.corpus)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read corpus {args.corpus}: {exc}") from exc
    args.out_dir.mkdir(parents=True, exist_ok=True)
    base = args.corpus.parent
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "source_tag", "file", "source"])
    state = SamplerState(args.seed, 0)
    failed = 0
    for i in range(args.count):
        tag, idx, state = draw_ref(corpus, cfgs["mix"], state)
        src = corpus.lists()[["box", "coarse", "detailed"].index(tag)][idx]
        name = f"mask_{i:06d}.png"
        try:
            ic.save_mask(args.out_dir / name, ic.load_mask(src))
        except TextMrfError as exc:
            log.warning("draw %d: %s", i, exc)
            failed += 1
            name = ""
        w.writerow([i, tag, name, Path(os.path.relpath(src, base)).as_posix()])
    (args.out_dir / "samples.csv").write_text(buf.getvalue(), encoding="utf-8")
    print(f"sample-masks: {args.count - failed} written, {failed} failed")
    return EXIT_OK if failed == 0 else EXIT_PARTIAL


# ---- overlay / validate / scan ------------------------------------------

def cmd_overlay(args) -> int:
    try:
        color = tuple(int(c) for c in args.color.split(","))
        if len(color) != 3:
            raise ValueError
    except ValueError as exc:
        raise UsageError(f"--color must be R,G,B, got {args.color!r}") from exc
    img = ic.load_rgb(args.image)
    mask = ic.load_mask(args.mask)
    ic.save_rgb(args.out, ic.overlay(img, mask, color, args.alpha))
    print(f"overlay: wrote {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    manifest = _load_manifest(args.manifest)
    report = validate(manifest, threads=args.threads)
    for eid, kind, detail in report.failures:
        print(f"{eid}\t{kind}\t{detail}")
    bad = len({f[0] for f in report.failures})
    print(f"validate: {report.checked} entries, {bad} with failures")
    return EXIT_OK if report.ok else EXIT_PARTIAL


def cmd_scan(args) -> int:
    manifest = scan_layout(args.root, args.layout)
    for w in manifest.warnings:
        log.warning("%s", w)
    manifest.save(args.out)
    print(f"scan: {len(manifest.entries)} pairs, {len(manifest.warnings)} warnings")
    return EXIT_OK


COMMANDS = {
    "refine": cmd_refine,
    "evaluate": cmd_evaluate,
    "sample-masks": cmd_sample_masks,
    "overlay": cmd_overlay,
    "validate": cmd_validate,
    "scan": cmd_scan,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "threads", 1) < 1:
        print("textmrf: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"textmrf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TextMrfError as exc:
        # nothing could be processed at all
        print(f"textmrf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
