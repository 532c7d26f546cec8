"""Command line front end.

    edr fit          --config run.json [--method M] [--d D] [--out DIR]
    edr transform    --model DIR/model.json --config run.json [--which test|train]
    edr eval         --config run.json [--method M] [--d D]
    edr sweep        --config run.json [--out DIR] [--threads N]
    edr oracle-check --config run.json

Exit codes: 0 success, 1 oracle threshold breached, 2 sweep cell failed,
64 bad config, 65 bad data, 70 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod, data as data_mod, evaluation as ev, linear, nonlinear, oracle
from .exceptions import (
    ConfigError,
    DataFormatError,
    DefinitenessError,
    DegenerateGeometryError,
    RankDeficiencyError,
)
from .graph import dump_csv
from .persist import load_model, save_embedding, save_model

EXIT_OK = 0
EXIT_ORACLE = 1
EXIT_SWEEP = 2
EXIT_CONFIG = 64
EXIT_DATA = 65
EXIT_NUMERIC = 70

log = logging.getLogger("einsteindr")


def _setup_logging():
    level = os.environ.get("EDR_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _parser():
    p = argparse.ArgumentParser(prog="edr", description="Tensor dimension reduction experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--seed", type=int, help="split seed (overrides config)")
        sp.add_argument("--threads", type=int, help="worker threads (overrides config)")
        sp.add_argument("--method", help="method id (overrides config)")
        sp.add_argument("--d", type=int, help="subspace dimension (overrides config)")

    for name in ("fit", "eval", "sweep", "oracle-check"):
        common(sub.add_parser(name))
    tp = sub.add_parser("transform")
    common(tp)
    tp.add_argument("--model", required=True, help="model JSON written by fit")
    tp.add_argument("--which", choices=("test", "train"), default="test")
    return p


def _config(args) -> dict:
    cfg = config_mod.load(args.config)
    over = {"out": args.out, "seed": args.seed, "threads": args.threads,
            "method": args.method, "d": args.d}
    for key, val in over.items():
        if val is not None:
            cfg[key] = val
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    if not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed must fit in 64 bits")
    return cfg


def _load_data(spec: dict) -> data_mod.DataSet:
    kind = spec["kind"]
    try:
        if kind == "idx":
            return data_mod.load_idx(spec["images"], spec.get("labels"))
        if kind == "images":
            return data_mod.load_image_dir(spec["root"], spec.get("color", "gray"), spec.get("resize"))
        if kind == "eten":
            return data_mod.load_eten_dataset(spec["tensor"], spec.get("labels"))
        return data_mod.make_synthetic_rgb(
            n_classes=spec.get("classes", 50),
            per_class=spec.get("per_class", 15),
            shape=tuple(spec.get("shape", (60, 60, 3))),
            noise=spec.get("noise", 0.1),
            seed=spec.get("data_seed", 0),
        )
    except KeyError as exc:
        raise ConfigError(f"data of kind {kind!r} needs key {exc}") from None
    except OSError as exc:
        raise DataFormatError(str(exc)) from exc


def datasets(cfg: dict):
    """Train and test sets described by the config."""
    if "data" not in cfg:
        raise ConfigError("config has no 'data' section")
    ds = _load_data(cfg["data"])
    if "test_data" in cfg:
        return ds, _load_data(cfg["test_data"])
    sp = cfg.get("split")
    if sp is None:
        raise ConfigError("config needs either 'split' or 'test_data'")
    plan = data_mod.SplitPlan(sp["train"], sp["test"], cfg["seed"], sp.get("per_class", True))
    try:
        return data_mod.split(ds, plan)
    except ValueError as exc:
        raise DataFormatError(str(exc)) from exc


def _method_and_d(cfg):
    if "method" not in cfg:
        raise ConfigError("no method given (config 'method' or --method)")
    if "d" not in cfg:
        raise ConfigError("no dimension given (config 'd' or --d)")
    ev.parse_method(cfg["method"]) if cfg["method"] in ev.METHODS else _unknown(cfg["method"])
    return cfg["method"], cfg["d"]


def _unknown(m):
    raise ConfigError(f"unknown method {m!r}")


def _echo(cfg):
    return {k: v for k, v in cfg.items() if k != "threads"}


def cmd_fit(cfg) -> int:
    method, d = _method_and_d(cfg)
    family = ev.parse_method(method)[0]
    if family in ("matrix", "baseline"):
        raise ConfigError(f"{method} is a reference method; use sweep or oracle-check")
    train, _ = datasets(cfg)
    prep = ev.Prepared(method, train, cfg)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    if cfg["dump_graph"]:
        for i, g in enumerate([prep.graph] if prep.graph is not None else (prep.slice_graphs or [])):
            dump_csv(g, out / f"graph{i}.csv")
    fitted = prep.fit(d)
    if family == "kernel":
        path = save_embedding(fitted.train_emb, out / "embedding.json", train.labels, _echo(cfg))
    else:
        path = save_model(fitted.model, out / "model.json", _echo(cfg))
    print(f"fit {method} d={d} n={train.n} -> {path}")
    return EXIT_OK


def transform_data(model, X):
    if isinstance(model, linear.ProjectionModel):
        return linear.transform(model, X)
    if model.kind == "le":
        return nonlinear.transform_le(model, X)
    return nonlinear.oos_lle(model, X)


def cmd_transform(cfg, model_path, which) -> int:
    model = load_model(model_path)
    train, test = datasets(cfg)
    ds = test if which == "test" else train
    Y = transform_data(model, ds.X)
    out = Path(cfg["out"])
    path = save_embedding(Y, out / f"embedding-{which}.json", ds.labels, _echo(cfg))
    print(f"transform {which} n={ds.n} shape={tuple(np.shape(Y))} -> {path}")
    return EXIT_OK


def cmd_eval(cfg) -> int:
    method, d = _method_and_d(cfg)
    train, test = datasets(cfg)
    fitted = ev.Prepared(method, train, cfg).fit(d, test)
    ir = ev.evaluate(fitted, train, test)
    print(f"{method} d={d} ir={ir:.2f}")
    return EXIT_OK


def cmd_sweep(cfg) -> int:
    methods = cfg.get("methods") or ([cfg["method"]] if "method" in cfg else None)
    dims = cfg.get("dims") or ([cfg["d"]] if "d" in cfg else None)
    if not methods or not dims:
        raise ConfigError("sweep needs 'methods' (or 'method') and 'dims' (or 'd')")
    for m in methods:
        if m not in ev.METHODS:
            raise ConfigError(f"unknown method {m!r}")
        if ev.parse_method(m)[0] == "kernel":
            raise ConfigError(f"{m} has no out-of-sample map and cannot be swept")
    train, test = datasets(cfg)
    results = ev.sweep(methods, train, test, dims, cfg, seed=cfg["seed"], threads=cfg["threads"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    ev.emit_csv(results, out / "sweep.csv", timing=cfg["timing"])
    ev.emit_timings(results, out / "timings.csv")
    ev.emit_svg(results, out / "sweep.svg")
    failed = sum(len(r.errors) for r in results)
    print(f"sweep {len(methods)} methods x {len(dims)} dims -> {out / 'sweep.csv'}"
          + (f" ({failed} failed cells)" if failed else ""))
    return EXIT_SWEEP if failed else EXIT_OK


def oracle_reports(cfg, train, test):
    ocfg = cfg["oracle"]
    reports = []
    for base in ocfg["methods"]:
        if base not in oracle.MATRIX_METHODS:
            raise ConfigError(f"no reference implementation for {base!r}")
        pt = ev.Prepared(f"{base}-e", train, cfg)
        pm = ev.Prepared(base, train, cfg)
        for d in ocfg["dims"]:
            ft, fm = pt.fit(d, test), pm.fit(d, test)
            ir_t, ir_m = ev.evaluate(ft, train, test), ev.evaluate(fm, train, test)
            if isinstance(ft.model, linear.ProjectionModel):
                rep = oracle.compare(f"{base}@{d}", ft.model.matrix(), fm.model.P, ir_t, ir_m)
            else:
                rep = oracle.compare(f"{base}@{d}", ft.train_emb, fm.train_emb, ir_t, ir_m,
                                     embeddings=(ft.test_emb, fm.test_emb))
            reports.append(rep)
    return reports


def cmd_oracle_check(cfg) -> int:
    train, test = datasets(cfg)
    reports = oracle_reports(cfg, train, test)
    lim_s, lim_ir = cfg["oracle"]["max_subspace"], cfg["oracle"]["max_ir_delta"]
    bad = 0
    for rep in reports:
        ok = rep.subspace_distance <= lim_s and abs(rep.ir_delta) <= lim_ir
        bad += not ok
        print(("ok   " if ok else "FAIL ") + rep.row())
    print(f"oracle-check: {len(reports) - bad}/{len(reports)} within limits")
    return EXIT_ORACLE if bad else EXIT_OK


def main(argv=None) -> int:
    _setup_logging()
    args = _parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "fit":
            return cmd_fit(cfg)
        if args.command == "transform":
            return cmd_transform(cfg, args.model, args.which)
        if args.command == "eval":
            return cmd_eval(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        return cmd_oracle_check(cfg)
    except ConfigError as exc:
        print(f"edr: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, FileNotFoundError) as exc:
        print(f"edr: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (RankDeficiencyError, DegenerateGeometryError, DefinitenessError,
            np.linalg.LinAlgError, ZeroDivisionError) as exc:
        print(f"edr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
