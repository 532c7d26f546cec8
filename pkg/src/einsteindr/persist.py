"""Saving fitted models as a JSON header plus ETEN payload files."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .exceptions import DataFormatError
from .linear import ProjectionModel
from .nonlinear import EmbeddingModel
from .tensor import read_eten, write_eten

FORMAT = 1


def _put(arrays: dict, prefix: Path) -> dict:
    names = {}
    for key, arr in arrays.items():
        if arr is None:
            continue
        fname = f"{prefix.name}.{key}.eten"
        write_eten(prefix.parent / fname, np.atleast_1d(np.asarray(arr, dtype=np.float64)))
        names[key] = fname
    return names


def save_model(model, path, config_echo: dict | None = None) -> Path:
    """Write ``path`` (JSON) and its payloads next to it; returns the JSON path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    prefix = path.with_suffix("")
    if isinstance(model, ProjectionModel):
        if model.multiweight:
            arrays = {f"P{r}": P for r, P in enumerate(model.P)}
            arrays.update({f"eig{r}": v for r, v in enumerate(model.eigenvalues)})
        else:
            arrays = {"P": model.P, "eig": model.eigenvalues}
        header = {
            "kind": "projection",
            "method": model.method,
            "d": model.d,
            "feature_shape": list(model.feature_shape),
            "skip_first": model.skip_first,
            "multiweight": model.multiweight,
            "slices": len(model.P) if model.multiweight else None,
            "meta": model.meta,
        }
    elif isinstance(model, EmbeddingModel):
        arrays = {
            "Y": model.Y,
            "values": model.values,
            "vectors": model.vectors,
            "degrees": model.degrees,
            "train_rows": model.train_rows,
        }
        header = {
            "kind": "embedding",
            "method": model.kind,
            "d": model.d,
            "feature_shape": list(model.feature_shape),
            "k": model.k,
            "reg": model.reg,
            "sigma": model.sigma,
            "skip_first": model.skip_first,
            "meta": model.meta,
        }
    else:
        raise TypeError(f"cannot save {type(model).__name__}")
    header["format"] = FORMAT
    header["payloads"] = _put(arrays, prefix)
    header["config"] = config_echo
    path.write_text(json.dumps(header, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def save_embedding(Y, path, labels=None, config_echo=None) -> Path:
    """Embedding (``d x n`` or ``d x I_M x n``) with optional labels."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    prefix = path.with_suffix("")
    arrays = {"Y": Y, "labels": None if labels is None else np.asarray(labels, dtype=np.float64)}
    header = {"kind": "embedding-data", "format": FORMAT, "shape": list(np.shape(Y)),
              "payloads": _put(arrays, prefix), "config": config_echo}
    path.write_text(json.dumps(header, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def load_model(path):
    path = Path(path)
    try:
        header = json.loads(path.read_text())
        payloads = {k: read_eten(path.parent / v) for k, v in header["payloads"].items()}
        kind = header["kind"]
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: unreadable model ({exc})") from exc
    if kind not in ("projection", "embedding"):
        raise DataFormatError(f"{path}: not a model file (kind {kind!r})")
    shape = tuple(header["feature_shape"])
    if kind == "projection":
        if header["multiweight"]:
            n = header["slices"]
            P = [payloads[f"P{r}"] for r in range(n)]
            eig = [payloads[f"eig{r}"] for r in range(n)]
        else:
            P, eig = payloads["P"], payloads["eig"]
        return ProjectionModel(header["method"], P, header["d"], shape, eig,
                               header["skip_first"], header["multiweight"], header["meta"])
    if kind == "embedding":
        return EmbeddingModel(
            kind=header["method"],
            Y=payloads["Y"],
            d=header["d"],
            values=payloads["values"],
            vectors=payloads.get("vectors"),
            degrees=payloads.get("degrees"),
            train_rows=payloads.get("train_rows"),
            feature_shape=shape,
            k=header["k"],
            reg=header["reg"],
            sigma=header["sigma"],
            skip_first=header["skip_first"],
            meta=header["meta"],
        )
