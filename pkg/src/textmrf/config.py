"""Nested run configuration: JSON documents and dotted-path overrides.

Every section maps one-to-one onto a config dataclass, so ``slic.k`` in a
JSON file and ``--slic.k=400`` on the command line address the same field.
"""
from __future__ import annotations

import json
from dataclasses import MISSING, asdict, fields, is_dataclass
from pathlib import Path

from .hfsmerge import MergeConfig, SelectConfig
from .maskmix import MixRatios
from .morphref import RefineConfig
from .strmetrics import MetricConfig
from .superpixel import SlicParams

SECTIONS = {
    "refine": RefineConfig,
    "slic": SlicParams,
    "merge": MergeConfig,
    "select": SelectConfig,
    "metrics": MetricConfig,
    "mix": MixRatios,
}


class ConfigError(ValueError):
    pass


def _default_of(f):
    if f.default is not MISSING:
        return f.default
    return f.default_factory()


def leaf_fields(cls=None, prefix=""):
    """Yield ``(dotted_path, default_value)`` for every scalar field."""
    if cls is None:
        for name, c in SECTIONS.items():
            yield from leaf_fields(c, name + ".")
        return
    for f in fields(cls):
        d = _default_of(f)
        if is_dataclass(d):
            yield from leaf_fields(type(d), prefix + f.name + ".")
        else:
            yield prefix + f.name, d


def _merge(base: dict, upd: dict, where: str) -> None:
    for k, v in upd.items():
        if k not in base:
            raise ConfigError(f"unknown config key {where}{k}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{where}{k} must be an object")
            _merge(base[k], v, f"{where}{k}.")
        else:
            base[k] = v


def _build(cls, d: dict):
    kwargs = {}
    for f in fields(cls):
        dflt = _default_of(f)
        kwargs[f.name] = _build(type(dflt), d[f.name]) if is_dataclass(dflt) else d[f.name]
    return cls(**kwargs)


def build_configs(doc: dict | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then the JSON document, then dotted overrides; returns section -> dataclass."""
    tree = {name: asdict(cls()) for name, cls in SECTIONS.items()}
    if doc:
        _merge(tree, doc, "")
    for path, value in (overrides or {}).items():
        *parents, leaf = path.split(".")
        node = tree
        for p in parents:
            if p not in node or not isinstance(node[p], dict):
                raise ConfigError(f"unknown config key {path}")
            node = node[p]
        if leaf not in node or isinstance(node[leaf], dict):
            raise ConfigError(f"unknown config key {path}")
        node[leaf] = value
    try:
        return {name: _build(cls, tree[name]) for name, cls in SECTIONS.items()}
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config_file(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return doc
