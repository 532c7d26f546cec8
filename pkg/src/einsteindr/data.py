"""Dataset loading, splitting and synthetic data.

Splits draw from a 64-bit linear congruential generator with Knuth's MMIX
constants so they can be reproduced in any language::

    state <- (6364136223846793005 * state + 1442695040888963407) mod 2**64

A uniform integer in ``[0, m)`` is taken from the high 32 bits of the new
state as ``((state >> 32) * m) >> 32``. Sampling without replacement is a
Fisher-Yates shuffle driven by that draw, run from the last position down.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DataFormatError, ShapeError
from .tensor import as_tensor, read_eten

LCG_A = 6364136223846793005
LCG_C = 1442695040888963407
MASK64 = (1 << 64) - 1

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801
IMAGE_EXTS = (".pgm", ".ppm", ".pnm")
GRAY_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass
class DataSet:
    """Sample tensor (last mode indexes samples) with optional integer labels."""

    X: np.ndarray
    labels: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = as_tensor(self.X)
        if self.X.ndim < 2:
            raise ShapeError("a dataset needs at least one feature mode and a sample mode")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.n,):
                raise ShapeError(f"{self.labels.shape[0]} labels for {self.n} samples")
        if not np.all(np.isfinite(self.X)):
            raise DataFormatError("data contains non-finite values")

    @property
    def n(self) -> int:
        return self.X.shape[-1]

    @property
    def feature_shape(self) -> tuple:
        return self.X.shape[:-1]

    def subset(self, idx) -> "DataSet":
        idx = np.asarray(idx, dtype=np.int64)
        labels = None if self.labels is None else self.labels[idx]
        return DataSet(self.X[..., idx], labels, dict(self.provenance, subset=len(idx)))


def concat(a: DataSet, b: DataSet) -> DataSet:
    if a.feature_shape != b.feature_shape:
        raise ShapeError("feature shapes differ")
    labels = None
    if a.labels is not None and b.labels is not None:
        labels = np.concatenate([a.labels, b.labels])
    return DataSet(np.concatenate([a.X, b.X], axis=-1), labels)


class LCG:
    """64-bit linear congruential generator (MMIX constants)."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (LCG_A * self.state + LCG_C) & MASK64
        return self.state

    def below(self, m: int) -> int:
        """Uniform integer in ``[0, m)``."""
        if m < 1:
            raise ValueError("m must be positive")
        return ((self.next_u64() >> 32) * m) >> 32

    def shuffle(self, items) -> list:
        items = list(items)
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items


@dataclass(frozen=True)
class SplitPlan:
    """Train/test counts, either per class (``per_class=True``) or in total."""

    train: int
    test: int
    seed: int = 0
    per_class: bool = True

    def __post_init__(self):
        if self.train < 0 or self.test < 0:
            raise ValueError("counts must be non-negative")


def split(ds: DataSet, plan: SplitPlan) -> tuple[DataSet, DataSet]:
    """Seeded sampling without replacement into disjoint train and test sets.

    Per-class plans shuffle each class (ascending label order, one generator)
    and take the first ``train`` then the next ``test`` indices. Total plans
    shuffle all samples. Both subsets keep the original sample order.
    """
    rng = LCG(plan.seed)
    if plan.per_class:
        if ds.labels is None:
            raise ValueError("a per-class split needs labels")
        tr, te = [], []
        for c in np.unique(ds.labels):
            members = np.flatnonzero(ds.labels == c).tolist()
            if plan.train + plan.test > len(members):
                raise ValueError(
                    f"class {c} has {len(members)} samples, plan needs {plan.train + plan.test}"
                )
            order = rng.shuffle(members)
            tr += order[: plan.train]
            te += order[plan.train: plan.train + plan.test]
    else:
        if plan.train + plan.test > ds.n:
            raise ValueError(f"dataset has {ds.n} samples, plan needs {plan.train + plan.test}")
        order = rng.shuffle(range(ds.n))
        tr = order[: plan.train]
        te = order[plan.train: plan.train + plan.test]
    return ds.subset(sorted(tr)), ds.subset(sorted(te))


# ------------------------------------------------------------------ IDX


def _read_bytes(path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


def _parse_idx(raw: bytes, magic: int, ndim: int, path):
    if len(raw) < 4 + 4 * ndim:
        raise DataFormatError(f"{path}: truncated header")
    (got,) = struct.unpack_from(">I", raw, 0)
    if got != magic:
        raise DataFormatError(f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}")
    dims = struct.unpack_from(f">{ndim}I", raw, 4)
    count = int(np.prod(dims))
    offset = 4 + 4 * ndim
    if len(raw) - offset < count:
        raise DataFormatError(f"{path}: payload has {len(raw) - offset} bytes, expected {count}")
    return dims, np.frombuffer(raw, dtype=np.uint8, count=count, offset=offset)


def load_idx(images_path, labels_path=None) -> DataSet:
    """MNIST-style IDX files (optionally gzipped) as an ``rows x cols x n`` dataset in [0, 1]."""
    (n, rows, cols), pix = _parse_idx(_read_bytes(images_path), IDX_IMAGES, 3, images_path)
    X = pix.reshape(n, rows, cols).transpose(1, 2, 0).astype(np.float64) / 255.0
    labels = None
    if labels_path is not None:
        (m,), lab = _parse_idx(_read_bytes(labels_path), IDX_LABELS, 1, labels_path)
        if m != n:
            raise DataFormatError(f"{n} images but {m} labels")
        labels = lab.astype(np.int64)
    prov = {"source": "idx", "images": str(images_path), "labels": str(labels_path)}
    return DataSet(X, labels, prov)


def write_idx(images_path, labels_path, images: np.ndarray, labels=None) -> None:
    """Write ``n x rows x cols`` uint8 images (and labels) as uncompressed IDX."""
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    Path(images_path).write_bytes(struct.pack(">4I", IDX_IMAGES, n, rows, cols) + images.tobytes())
    if labels is not None:
        labels = np.asarray(labels, dtype=np.uint8)
        Path(labels_path).write_bytes(struct.pack(">2I", IDX_LABELS, len(labels)) + labels.tobytes())


# ------------------------------------------------------------------ netpbm


def _tokens(raw: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    toks, pos = [], 0
    while len(toks) < count:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(raw):
            raise DataFormatError("truncated header")
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        toks.append(raw[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return toks, pos + 1


def read_pnm(path) -> tuple[np.ndarray, str]:
    """Binary PGM (P5) or PPM (P6), 8-bit, scaled to [0, 1].

    Returns ``(image, magic)`` with ``image`` of shape ``h x w`` or ``h x w x 3``.
    """
    raw = Path(path).read_bytes()
    try:
        (magic, w, h, maxval), pos = _tokens(raw, 4)
        w, h, maxval = int(w), int(h), int(maxval)
    except (DataFormatError, ValueError) as exc:
        raise DataFormatError(f"{path}: bad header") from exc
    magic = magic.decode("ascii", "replace")
    if magic not in ("P5", "P6"):
        raise DataFormatError(f"{path}: unsupported format {magic!r}")
    if not 0 < maxval < 256:
        raise DataFormatError(f"{path}: only 8-bit images are supported (maxval {maxval})")
    ch = 3 if magic == "P6" else 1
    need = w * h * ch
    if len(raw) - pos < need:
        raise DataFormatError(f"{path}: truncated raster")
    pix = np.frombuffer(raw, dtype=np.uint8, count=need, offset=pos).astype(np.float64) / maxval
    img = pix.reshape(h, w, 3) if ch == 3 else pix.reshape(h, w)
    return img, magic


def write_pnm(path, img) -> None:
    """Write an image in [0, 1] as P5 (2-D) or P6 (``h x w x 3``)."""
    img = np.asarray(img, dtype=np.float64)
    magic = b"P6" if img.ndim == 3 else b"P5"
    h, w = img.shape[:2]
    data = np.clip(np.rint(img * 255), 0, 255).astype(np.uint8).tobytes()
    Path(path).write_bytes(magic + f"\n{w} {h}\n255\n".encode() + data)


def resize_bilinear(img, size) -> np.ndarray:
    """Bilinear resampling with pixel centers at half-integer positions."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    H, W = int(size[0]), int(size[1])
    if (H, W) == (h, w):
        return img.copy()

    def axis(n_out, n_in):
        x = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        x = np.clip(x, 0, n_in - 1)
        lo = np.floor(x).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, x - lo

    r0, r1, fr = axis(H, h)
    c0, c1, fc = axis(W, w)
    if img.ndim == 3:
        fr = fr[:, None, None]
        fc = fc[None, :, None]
    else:
        fr = fr[:, None]
        fc = fc[None, :]
    top = img[r0][:, c0] * (1 - fc) + img[r0][:, c1] * fc
    bot = img[r1][:, c0] * (1 - fc) + img[r1][:, c1] * fc
    return top * (1 - fr) + bot * fr


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_image_dir(root, color: str = "gray", resize_to=None) -> DataSet:
    """Images laid out one subdirectory per class.

    Subdirectories are visited in sorted order and numbered from 0; files
    inside are sorted too. ``gray`` converts P6 input to luminance; ``rgb``
    requires P6 throughout. Result is ``h x w x n`` or ``h x w x 3 x n``.
    """
    if color not in ("gray", "rgb"):
        raise ValueError(f"color must be 'gray' or 'rgb', got {color!r}")
    root = Path(root)
    classes = sorted(p for p in root.iterdir() if p.is_dir())
    if not classes:
        raise DataFormatError(f"{root}: no class subdirectories")
    slices, labels, files = [], [], []
    for c, sub in enumerate(classes):
        for f in sorted(p for p in sub.iterdir() if p.suffix.lower() in IMAGE_EXTS):
            img, magic = read_pnm(f)
            if color == "rgb" and magic != "P6":
                raise DataFormatError(f"{f}: grayscale image in rgb mode")
            if color == "gray" and img.ndim == 3:
                img = img @ np.array(GRAY_WEIGHTS)
            if resize_to is not None:
                img = resize_bilinear(img, resize_to)
            if slices and img.shape != slices[0].shape:
                raise DataFormatError(f"{f}: size {img.shape} differs from {slices[0].shape}")
            slices.append(img)
            labels.append(c)
            files.append({"file": str(f.relative_to(root)), "label": c, "sha256": _sha256(f)})
    if not slices:
        raise DataFormatError(f"{root}: no images found")
    X = np.stack(slices, axis=-1)
    prov = {"source": "images", "root": str(root), "color": color,
            "classes": [p.name for p in classes], "files": files}
    return DataSet(X, labels, prov)


def write_manifest(ds: DataSet, path) -> None:
    """JSON listing each source file with its label and checksum."""
    files = ds.provenance.get("files")
    if files is None:
        raise ValueError("dataset has no file provenance")
    doc = {"root": ds.provenance.get("root"), "color": ds.provenance.get("color"),
           "classes": ds.provenance.get("classes"), "files": files}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def verify_manifest(path) -> list[str]:
    """Files whose checksum no longer matches the manifest."""
    doc = json.loads(Path(path).read_text())
    root = Path(doc["root"])
    return [f["file"] for f in doc["files"] if _sha256(root / f["file"]) != f["sha256"]]


def load_eten_dataset(tensor_path, labels_path=None) -> DataSet:
    """ETEN tensor with labels from a text file (one integer per line)."""
    X = read_eten(tensor_path)
    labels = None
    if labels_path is not None:
        try:
            labels = np.loadtxt(labels_path, dtype=np.int64, ndmin=1)
        except ValueError as exc:
            raise DataFormatError(f"{labels_path}: bad label file") from exc
    return DataSet(X, labels, {"source": "eten", "tensor": str(tensor_path)})


# ------------------------------------------------------------------ synthetic


def make_synthetic_rgb(
    n_classes: int = 50,
    per_class: int = 15,
    shape=(60, 60, 3),
    noise: float = 0.1,
    class_scale: float = 0.1,
    nuisance: float = 0.1,
    seed: int = 0,
) -> DataSet:
    """Colour images built from smooth patterns, with class and nuisance structure.

    All classes share a base image. Each class adds its own smooth pattern
    of amplitude ``class_scale``. Each sample then adds a random mix of
    eight smooth nuisance patterns shared by all classes (amplitude
    ``nuisance``), a random per-channel gain, and Gaussian pixel noise,
    and is clipped to [0, 1].
    """
    rng = np.random.default_rng(seed)
    h, w, ch = shape
    yy, xx = np.meshgrid(np.linspace(0, 1, h), np.linspace(0, 1, w), indexing="ij")

    def smooth(n_waves):
        img = np.zeros((h, w))
        for _ in range(n_waves):
            fy, fx = rng.integers(1, 5, size=2)
            py, px = rng.uniform(0, 2 * np.pi, size=2)
            img += rng.normal() * np.cos(np.pi * fy * yy + py) * np.cos(np.pi * fx * xx + px)
        return img / max(np.abs(img).max(), 1e-12)

    def colour(n_waves):
        return np.stack([smooth(n_waves) for _ in range(ch)], axis=-1)

    base = 0.5 + 0.2 * colour(3)
    protos = np.stack([base + class_scale * colour(4) for _ in range(n_classes)])
    nuis = np.stack([colour(3) for _ in range(8)])
    X = np.empty((h, w, ch, n_classes * per_class))
    labels = np.repeat(np.arange(n_classes), per_class)
    for s, c in enumerate(labels):
        coef = rng.standard_normal(len(nuis)) * nuisance / np.sqrt(len(nuis))
        gain = rng.uniform(0.9, 1.1, size=ch)
        img = protos[c] * gain + np.tensordot(coef, nuis, axes=1)
        img += noise * rng.standard_normal((h, w, ch))
        X[..., s] = np.clip(img, 0.0, 1.0)
    prov = {"source": "synthetic-rgb", "seed": seed, "noise": noise,
            "class_scale": class_scale, "nuisance": nuisance}
    return DataSet(X, labels, prov)
