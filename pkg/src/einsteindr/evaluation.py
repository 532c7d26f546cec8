"""Method registry, 1-NN recognition, dimension sweeps and result files."""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import _accel, config as config_mod, kernel, linear, nonlinear, oracle
from .data import DataSet
from .graph import (
    WeightGraph,
    build_affinity,
    combine_repulsion,
    knn_edges,
    lle_weights,
    pairwise_sq_dists,
    repulsion_weights,
    sample_rows,
)

log = logging.getLogger(__name__)

LINEAR = ("pca", "spca", "olpp", "onpp", "lpp", "npp")
MULTI = ("olpp", "onpp", "lpp", "npp")
NONLINEAR = ("le", "lle")
KERNEL = ("kpca", "klpp", "konpp", "kolpp")
MATRIX = ("pca", "olpp", "onpp", "lpp", "npp", "le", "lle")


def _method_table():
    table = {}
    for b in LINEAR:
        table[f"{b}-e"] = ("tensor", b)
    for b in MULTI:
        table[f"{b}-e-mw"] = ("multi", b)
    for b in NONLINEAR:
        table[f"{b}-e"] = ("nonlinear", b)
    for b in KERNEL:
        table[f"{b}-e"] = ("kernel", b)
    for b in MATRIX:
        table[b] = ("matrix", b)
    table["baseline"] = ("baseline", None)
    return table


METHODS = _method_table()
SWEEPABLE = tuple(m for m, (fam, _) in METHODS.items() if fam != "kernel")


def parse_method(name: str):
    try:
        return METHODS[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; known: {sorted(METHODS)}") from None


# ------------------------------------------------------------------ classification


def nn_classify(train_emb, train_labels, test_emb) -> np.ndarray:
    """Label of the nearest training column for each test column (ties to the lower index)."""
    A = np.asarray(train_emb, dtype=np.float64)
    B = np.asarray(test_emb, dtype=np.float64)
    A = A.reshape(-1, A.shape[-1], order="F")
    B = B.reshape(-1, B.shape[-1], order="F")
    if A.shape[1] == 0:
        raise ValueError("empty training set")
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"embedding sizes differ: {A.shape[0]} vs {B.shape[0]}")
    idx = _accel.nearest(A.T, B.T)
    return np.asarray(train_labels)[idx]


def recognition_rate(pred, truth) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError("prediction and truth lengths differ")
    if pred.size == 0:
        raise ValueError("empty input")
    return 100.0 * float(np.sum(pred == truth)) / pred.size


# ------------------------------------------------------------------ graphs


def n_classes(ds: DataSet):
    return None if ds.labels is None else int(len(np.unique(ds.labels)))


def affinity_graph(X, labels, gcfg: dict, rcfg: dict | None, d2=None) -> WeightGraph:
    """Gaussian affinity from the config, optionally supervised and with repulsion."""
    if d2 is None:
        d2 = pairwise_sq_dists(X)
    sup = labels if gcfg["supervised"] else None
    if gcfg["supervised"] and labels is None:
        raise ValueError("supervised graph needs labels")
    G = build_affinity(X, gcfg["sigma"], gcfg["knn"], gcfg["mode"], gcfg["threshold"], sup, d2=d2)
    if rcfg is not None:
        if labels is None:
            raise ValueError("repulsion graph needs labels")
        edges = knn_edges(d2, rcfg["knn"]) if rcfg["knn"] else None
        G = combine_repulsion(G, repulsion_weights(labels, edges), rcfg["beta"])
        G.meta["signed"] = rcfg["beta"] < 0
    return G


def reconstruction_graph(X, labels, gcfg: dict, d2=None) -> WeightGraph:
    """LLE weights or row-normalized Gaussian weights, per ``gcfg['weights']``."""
    sup = labels if gcfg["supervised"] else None
    if gcfg["supervised"] and labels is None:
        raise ValueError("supervised weights need labels")
    if gcfg["weights"] == "lle":
        return lle_weights(X, gcfg["k"], gcfg["reg"], labels=sup, mu=gcfg["mu"], d2=d2)
    G = affinity_graph(X, labels, gcfg, None, d2=d2)
    return WeightGraph(linear.row_normalize(G.W), False, dict(G.meta, kind="gaussian-rownorm"))


def method_graph(base: str, X, labels, opts: dict, d2=None):
    if base in ("olpp", "lpp", "le", "klpp"):
        return affinity_graph(X, labels, opts["graph"], opts["repulsion"], d2=d2)
    if base in ("onpp", "npp", "lle", "konpp"):
        return reconstruction_graph(X, labels, opts["graph"], d2=d2)
    return None


# ------------------------------------------------------------------ fitting


@dataclass
class Fitted:
    """A method fitted at one ``d`` with its train and test embeddings."""

    method: str
    d: int
    train_emb: np.ndarray
    test_emb: np.ndarray | None
    model: object = None


class Prepared:
    """Per-method state that does not depend on ``d`` (graphs, distances)."""

    def __init__(self, method: str, train: DataSet, cfg: dict):
        self.method = method
        self.family, self.base = parse_method(method)
        self.train = train
        self.opts = config_mod.method_options(cfg, method)
        self.graph = None
        self.slice_graphs = None
        X, y = train.X, train.labels
        if self.family in ("tensor", "matrix", "nonlinear", "kernel"):
            self.graph = method_graph(self.base, X, y, self.opts)
        elif self.family == "multi":
            self.slice_graphs = [
                method_graph(self.base, linear.slice_data(X, r), y, self.opts)
                for r in range(X.shape[-2])
            ]

    def signed(self):
        g = self.graph if self.graph is not None else (self.slice_graphs or [None])[0]
        return bool(g is not None and g.meta.get("signed"))

    def skip(self, default):
        s = self.opts["skip_first"]
        return default if s is None else s

    def pca_dim(self, d):
        return config_mod.resolve_pca_dim(self.opts["pca_dim"], d, n_classes(self.train))

    def fit(self, d: int, test: DataSet | None = None) -> Fitted:
        fam, base, X, y = self.family, self.base, self.train.X, self.train.labels
        Xt = None if test is None else test.X
        if fam == "baseline":
            return Fitted(self.method, d, sample_rows(X).T, None if Xt is None else sample_rows(Xt).T)
        if fam in ("tensor", "multi"):
            model = self._fit_linear(d)
            tr = linear.flatten_embedding(linear.transform(model, X))
            te = None if Xt is None else linear.flatten_embedding(linear.transform(model, Xt))
            return Fitted(self.method, d, tr, te, model)
        if fam == "nonlinear":
            if base == "le":
                model = nonlinear.fit_le(X, self.graph, d, skip_first=self.skip(True),
                                         signed=self.signed())
                te = None if Xt is None else nonlinear.transform_le(model, Xt)
            else:
                g = self.opts["graph"]
                model = nonlinear.fit_lle(X, g["k"], d, g["reg"], W=self.graph,
                                          skip_first=self.skip(True))
                te = None if Xt is None else nonlinear.oos_lle(model, Xt)
            return Fitted(self.method, d, model.Y, te, model)
        if fam == "matrix":
            return self._fit_matrix(d, Xt)
        if fam == "kernel":
            return Fitted(self.method, d, self._fit_kernel(d), None)
        raise AssertionError(fam)

    def _fit_linear(self, d):
        X, y, base = self.train.X, self.train.labels, self.base
        if base == "pca":
            return linear.fit_pca(X, d)
        if base == "spca":
            return linear.fit_spca(X, y, d)
        kw = {"pca_dim": self.pca_dim(d), "skip_first": self.skip(False)}
        if base in ("olpp", "lpp"):
            kw["signed"] = self.signed()
        if self.family == "multi":
            return linear.fit_multiweight(X, self.slice_graphs, d, base, **kw)
        return linear.FITTERS[base](X, self.graph, d, **kw)

    def _fit_matrix(self, d, Xt):
        X = sample_rows(self.train.X).T
        base = self.base
        W = None if self.graph is None else self.graph.W
        g = self.opts["graph"]
        skip = self.opts["skip_first"]
        res = oracle.matrix_method(base, X, W, d, pca_dim=self.pca_dim(d), skip_first=skip,
                                   k=g["k"], reg=g["reg"])
        T = None if Xt is None else sample_rows(Xt).T
        if res.P is not None:
            tr = res.P.T @ X
            te = None if T is None else res.P.T @ T
        elif base == "le":
            tr = res.Y
            te = None if T is None else oracle.oos_le(res, self._le_test_affinity(X, T))
        else:
            tr = res.Y
            te = None if T is None else oracle.oos_lle(res, T)
        return Fitted(self.method, d, tr, te, res)

    def _le_test_affinity(self, X, T):
        sigma = self.graph.meta["sigma"]
        d2 = oracle.sq_distances(X, T)  # n x n_t
        Kt = np.exp(-d2 / sigma**2)
        k = self.graph.meta.get("k")
        if k is not None:
            nb = oracle.neighbours(d2.T, k, exclude_self=False)
            mask = np.zeros_like(Kt, dtype=bool)
            for t in range(T.shape[1]):
                mask[nb[t], t] = True
            Kt = np.where(mask, Kt, 0.0)
        return Kt

    def _fit_kernel(self, d):
        kcfg = self.opts["kernel"]
        spec = kernel.KernelSpec(**kcfg)
        K = kernel.gram(self.train.X, spec)
        if self.base == "kpca":
            return kernel.fit_kpca(K, d)
        if self.base == "klpp":
            return kernel.fit_klpp(K, self.graph, d, skip_first=self.skip(False))
        if self.base == "konpp":
            return kernel.fit_konpp(K, self.graph, d, skip_first=self.skip(False))
        return kernel.fit_kolpp(K, d, skip_first=self.skip(False))


def evaluate(fitted: Fitted, train: DataSet, test: DataSet) -> float:
    pred = nn_classify(fitted.train_emb, train.labels, fitted.test_emb)
    return recognition_rate(pred, test.labels)


# ------------------------------------------------------------------ sweeps


@dataclass
class SweepResult:
    method: str
    seed: int
    dims: list = field(default_factory=list)
    ir: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)

    def rows(self):
        return list(zip(self.dims, self.ir, self.seconds))


def _run_method(method, train, test, dims, cfg, seed) -> SweepResult:
    res = SweepResult(method, seed)
    try:
        prep = Prepared(method, train, cfg)
    except Exception as exc:  # graph construction failed: every cell errors
        log.warning("%s: preparation failed: %s", method, exc)
        prep, prep_error = None, exc
    for d in dims:
        t0 = time.perf_counter()
        try:
            if prep is None:
                raise prep_error
            ir = evaluate(prep.fit(d, test), train, test)
        except Exception as exc:
            log.warning("%s d=%d failed: %s", method, d, exc)
            res.errors[d] = f"{type(exc).__name__}: {exc}"
            ir = math.nan
        res.dims.append(d)
        res.ir.append(ir)
        res.seconds.append(time.perf_counter() - t0)
        log.info("%s d=%d ir=%.2f", method, d, ir)
    return res


def sweep(methods, train: DataSet, test: DataSet, dims, cfg: dict | None = None,
          seed: int = 0, threads: int = 1) -> list[SweepResult]:
    """Fit each method at each ``d`` on ``train`` and score 1-NN recognition on ``test``.

    Cell failures are recorded in ``SweepResult.errors`` and the sweep goes
    on. Methods run concurrently on ``threads`` workers; output order follows
    ``methods``.
    """
    dims = sorted(int(d) for d in dims)
    if not dims:
        raise ValueError("dims must be nonempty")
    if len(set(dims)) != len(dims):
        raise ValueError("dims must be distinct")
    cfg = config_mod.with_defaults({}) if cfg is None else cfg
    if train.labels is None or test.labels is None:
        raise ValueError("sweeps need labelled train and test sets")
    for m in methods:
        if parse_method(m)[0] == "kernel":
            raise ValueError(f"{m} has no out-of-sample map and cannot be swept")
    if threads <= 1 or len(methods) == 1:
        return [_run_method(m, train, test, dims, cfg, seed) for m in methods]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = [pool.submit(_run_method, m, train, test, dims, cfg, seed) for m in methods]
        return [f.result() for f in futs]


# ------------------------------------------------------------------ output

CSV_COLUMNS = ["method", "d", "ir", "seconds", "seed"]


def _fmt_ir(v):
    return "" if math.isnan(v) else f"{v:.2f}"


def emit_csv(results, path, timing: bool = False) -> None:
    """One row per (method, d). ``seconds`` stays blank unless ``timing`` is set,
    so files from repeated runs compare byte for byte."""
    if not results:
        raise ValueError("no results to write")
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(CSV_COLUMNS)
        for r in results:
            for d, ir, sec in r.rows():
                out.writerow([r.method, d, _fmt_ir(ir), f"{sec:.4f}" if timing else "", r.seed])


def emit_timings(results, path) -> None:
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["method", "d", "seconds"])
        for r in results:
            for d, _, sec in r.rows():
                out.writerow([r.method, d, f"{sec:.4f}"])


def load_csv(path) -> list[SweepResult]:
    by_method: dict[str, SweepResult] = {}
    with Path(path).open(newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {rd.fieldnames}")
        for row in rd:
            r = by_method.setdefault(row["method"], SweepResult(row["method"], int(row["seed"])))
            r.dims.append(int(row["d"]))
            r.ir.append(float(row["ir"]) if row["ir"] else math.nan)
            r.seconds.append(float(row["seconds"]) if row["seconds"] else math.nan)
    return list(by_method.values())


PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def emit_svg(results, path, title: str = "Recognition rate by subspace dimension") -> None:
    """Line chart of IR against ``d``: one polyline per method, axes, ticks and legend."""
    if not results:
        raise ValueError("no results to plot")
    W, H = 800, 500
    left, right, top, bottom = 70, 180, 40, 60
    pw, ph = W - left - right, H - top - bottom
    all_d = [d for r in results for d in r.dims]
    dmin, dmax = min(all_d), max(all_d)
    if dmin == dmax:
        dmin, dmax = dmin - 1, dmax + 1

    def sx(d):
        return left + pw * (d - dmin) / (dmax - dmin)

    def sy(v):
        return top + ph * (1 - v / 100.0)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="15">'
        f"{escape(title)}</text>",
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for v in range(0, 101, 20):
        y = sy(v)
        parts.append(f'<line x1="{left - 4}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end">{v}</text>')
    for d in sorted(set(all_d)):
        x = sx(d)
        parts.append(f'<line x1="{x:.1f}" y1="{top + ph}" x2="{x:.1f}" y2="{top + ph + 4}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{top + ph + 18}" text-anchor="middle">{d}</text>')
    parts.append(f'<text x="{left + pw / 2:.1f}" y="{H - 15}" text-anchor="middle">'
                 "subspace dimension d</text>")
    parts.append(f'<text x="18" y="{top + ph / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 18 {top + ph / 2:.1f})">recognition rate (%)</text>')
    for i, r in enumerate(results):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(d):.1f},{sy(v):.1f}" for d, v in zip(r.dims, r.ir) if not math.isnan(v))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}">'
                     f"<title>{escape(r.method)}</title></polyline>")
        ly = top + 10 + 18 * i
        lx = left + pw + 20
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 30}" y="{ly + 4}">{escape(r.method)}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
