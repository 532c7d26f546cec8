"""Run configuration: JSON schema, defaults and merging."""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

import jsonschema

from .exceptions import ConfigError

GRAPH_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "sigma": {"oneOf": [{"const": "auto"}, {"type": "number", "exclusiveMinimum": 0}]},
        "knn": {"type": ["integer", "null"], "minimum": 1},
        "mode": {"enum": ["union", "mutual"]},
        "threshold": {"type": ["number", "null"], "minimum": 0},
        "supervised": {"type": "boolean"},
        "weights": {"enum": ["lle", "gaussian"]},
        "k": {"type": "integer", "minimum": 1},
        "reg": {"type": "number", "exclusiveMinimum": 0},
        "mu": {"type": "number", "minimum": 0},
    },
}

REPULSION_SCHEMA = {
    "type": ["object", "null"],
    "additionalProperties": False,
    "properties": {
        "beta": {"type": "number"},
        "knn": {"type": ["integer", "null"], "minimum": 1},
    },
}

KERNEL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["gaussian", "polynomial", "linear", "laplacian", "sigmoid"]},
        "sigma": {"oneOf": [{"const": "auto"}, {"type": "number", "exclusiveMinimum": 0}]},
        "degree": {"type": "integer", "minimum": 1},
        "offset": {"type": "number"},
        "slope": {"type": "number"},
    },
}

PCA_DIM_SCHEMA = {
    "oneOf": [
        {"type": "null"},
        {"type": "integer", "minimum": 1},
        {"type": "string", "pattern": r"^d\+(classes|[0-9]+)$"},
    ]
}

METHOD_OPTIONS = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "graph": GRAPH_SCHEMA,
        "repulsion": REPULSION_SCHEMA,
        "pca_dim": PCA_DIM_SCHEMA,
        "skip_first": {"type": ["boolean", "null"]},
        "kernel": KERNEL_SCHEMA,
    },
}

DATA_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["idx", "images", "eten", "synthetic-rgb"]},
        "images": {"type": "string"},
        "labels": {"type": "string"},
        "root": {"type": "string"},
        "color": {"enum": ["gray", "rgb"]},
        "resize": {"type": "array", "items": {"type": "integer", "minimum": 1},
                   "minItems": 2, "maxItems": 2},
        "tensor": {"type": "string"},
        "classes": {"type": "integer", "minimum": 1},
        "per_class": {"type": "integer", "minimum": 1},
        "shape": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "noise": {"type": "number", "minimum": 0},
        "data_seed": {"type": "integer", "minimum": 0},
    },
}

SPLIT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["train", "test"],
    "properties": {
        "train": {"type": "integer", "minimum": 0},
        "test": {"type": "integer", "minimum": 0},
        "per_class": {"type": "boolean"},
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "method": {"type": "string"},
        "methods": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "d": {"type": "integer", "minimum": 1},
        "dims": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "data": DATA_SCHEMA,
        "test_data": DATA_SCHEMA,
        "split": SPLIT_SCHEMA,
        "graph": GRAPH_SCHEMA,
        "repulsion": REPULSION_SCHEMA,
        "kernel": KERNEL_SCHEMA,
        "pca_dim": PCA_DIM_SCHEMA,
        "skip_first": {"type": ["boolean", "null"]},
        "overrides": {"type": "object", "additionalProperties": METHOD_OPTIONS},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "threads": {"type": ["integer", "null"], "minimum": 1},
        "timing": {"type": "boolean"},
        "out": {"type": "string"},
        "dump_graph": {"type": "boolean"},
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "methods": {"type": "array", "items": {"type": "string"}},
                "dims": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "max_subspace": {"type": "number", "exclusiveMinimum": 0},
                "max_ir_delta": {"type": "number", "minimum": 0},
            },
        },
    },
}

DEFAULTS = {
    "graph": {
        "sigma": "auto",
        "knn": None,
        "mode": "union",
        "threshold": None,
        "supervised": False,
        "weights": "lle",
        "k": 7,
        "reg": 1e-3,
        "mu": 0.2,
    },
    "repulsion": None,
    "kernel": {"kind": "gaussian", "sigma": "auto", "degree": 2, "offset": 1.0, "slope": 1.0},
    "pca_dim": None,
    "skip_first": None,
    "overrides": {},
    "seed": 0,
    "threads": None,
    "timing": False,
    "out": "out",
    "dump_graph": False,
    "oracle": {"methods": ["pca", "olpp", "onpp", "lpp", "npp", "le", "lle"],
               "dims": [5, 15, 25], "max_subspace": 1e-6, "max_ir_delta": 0.0},
}

REPULSION_DEFAULTS = {"beta": 1.0, "knn": None}


def validate(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def with_defaults(cfg: dict) -> dict:
    validate(cfg)
    out = _merge(DEFAULTS, cfg)
    if out.get("repulsion") is not None:
        out["repulsion"] = _merge(REPULSION_DEFAULTS, out["repulsion"])
    if out["threads"] is None:
        out["threads"] = os.cpu_count() or 1
    return out


def load(path) -> dict:
    """Read, validate and complete a JSON config file."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return with_defaults(raw)


def method_options(cfg: dict, method: str) -> dict:
    """Graph, repulsion, pca_dim, skip_first and kernel settings for one method."""
    opts = {k: copy.deepcopy(cfg[k]) for k in ("graph", "repulsion", "pca_dim", "skip_first", "kernel")}
    over = cfg.get("overrides", {}).get(method, {})
    for key, val in over.items():
        if key == "repulsion" and val is not None:
            opts[key] = _merge(opts[key] or REPULSION_DEFAULTS, val)
        elif isinstance(val, dict) and isinstance(opts.get(key), dict):
            opts[key] = _merge(opts[key], val)
        else:
            opts[key] = copy.deepcopy(val)
    return opts


def resolve_pca_dim(rule, d: int, n_classes: int | None):
    """Turn a ``pca_dim`` setting into a rank (or ``None``) for a given ``d``."""
    if rule is None or isinstance(rule, int):
        return rule
    extra = rule.split("+", 1)[1]
    if extra == "classes":
        if n_classes is None:
            raise ConfigError("pca_dim 'd+classes' needs labelled data")
        return d + n_classes
    return d + int(extra)
