"""Command-line entry point: gen, run, sweep, duals, tune-gamma, verify, ingest.

Exit codes: 0 success, 1 failed verification, 2 usage, 3 data, 4 numeric.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .engine import simulate
from .errors import DataError, NumericFailure, PoolingLabError
from .instance import (CountWindow, TimeWindow, adversarial_any_index_offline, adversarial_gre_offline,
                       adversarial_gre_online, adversarial_pb_offline, adversarial_pb_online,
                       adversarial_rewardC_online, gen_2d_common_origin, gen_2d_heterogeneous, gen_beta_1d,
                       gen_uniform_1d, instance_from_json, instance_to_json)
from .offline.lp import lp_relaxation
from .offline.matching import feasible_edges, solve_opt
from .policies import BATCH_MODES, POLICY_NAMES, build_policy, policy_label, tune_gamma
from .pricing import DEFAULT_1D_CELLS, OneDUniform, PriceTable, TwoDGrid, build_price_table, grid_covering
from .topology import Topology

SEED_ENV = "POOLING_LAB_SEED"


class UsageError(PoolingLabError):
    exit_code = 2


# --- helpers ------------------------------------------------------------------------


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}")


def _meta(command: str, config: dict) -> dict:
    return {"tool": "pooling-lab", "version": __version__, "command": command, "config": config}


def _dump(doc, path) -> None:
    text = json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DataError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})")


def _load_instance(path):
    doc = _load_json(path)
    try:
        return instance_from_json(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: not a valid instance ({exc})")


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    """Effective config: defaults, then the --config file, then explicit flags."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        cfg.update(_load_json(args.config))
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _price_table(cfg: dict, topology: Topology):
    if cfg.get("price_table"):
        try:
            return PriceTable.from_json(_load_json(cfg["price_table"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{cfg['price_table']}: not a valid price table ({exc})")
    if cfg.get("history"):
        history = [_load_instance(p) for p in cfg["history"]]
        return build_price_table(history, _scheme(cfg, history, topology))
    return None


def _scheme(cfg: dict, history, topology: Topology):
    if topology.is_1d:
        return OneDUniform(int(cfg.get("cells") or DEFAULT_1D_CELLS))
    level = int(cfg.get("grid_level") if cfg.get("grid_level") is not None else 3)
    return grid_covering(history, level) if cfg.get("fit_grid", True) else TwoDGrid(level)


def _policy_desc(cfg: dict) -> dict:
    desc = {"name": cfg["policy"]}
    if cfg["policy"] in BATCH_MODES:
        if cfg.get("price"):
            desc["price"] = cfg["price"]
            desc["gamma"] = float(cfg.get("gamma") or 0.0)
        if cfg.get("period") is not None:
            desc["period"] = float(cfg["period"])
    elif cfg.get("price") or cfg.get("period") is not None:
        raise UsageError("--price and --period only apply to bat, rbat and prbat")
    if cfg["policy"] == "prbat" and cfg.get("period") is None:
        raise UsageError("prbat needs --period")
    return desc


def _negative(flag: str, topology: Topology):
    return {"auto": None, "allow": True, "forbid": False}[flag or "auto"]


# --- commands ------------------------------------------------------------------------

GEN_KINDS = ("uniform1d", "beta1d", "2d-common", "2d-het", "adversarial-gre-offline",
             "adversarial-pb-offline", "adversarial-gre-online", "adversarial-pb-online",
             "adversarial-any-index", "adversarial-separation-online")


def cmd_gen(args) -> int:
    cfg = _merge(args, {"kind": None, "n": None, "d": None, "window": None, "seed": None,
                        "alpha": 0.5, "beta": 2.0, "k": None, "eps": 0.1, "theta_c": 0.5,
                        "topology": None})
    if cfg["seed"] is None:
        cfg["seed"] = _default_seed()
    kind, n, d, seed = cfg["kind"], cfg["n"], cfg["d"], int(cfg["seed"])
    needs_n = kind not in ("adversarial-pb-offline",)
    if needs_n and n is None:
        raise UsageError(f"--n is required for {kind}")
    try:
        if kind == "uniform1d":
            inst = gen_uniform_1d(n, seed, d=d)
        elif kind == "beta1d":
            inst = gen_beta_1d(n, cfg["alpha"], cfg["beta"], seed, d=d)
        elif kind == "2d-common":
            inst = gen_2d_common_origin(n, seed, d=d)
        elif kind == "2d-het":
            inst = gen_2d_heterogeneous(n, seed, d=d)
        elif kind == "adversarial-gre-offline":
            inst = adversarial_gre_offline(n, cfg["eps"])
        elif kind == "adversarial-pb-offline":
            if cfg["k"] is None:
                raise UsageError("--k is required for adversarial-pb-offline")
            inst = adversarial_pb_offline(cfg["k"])
        elif kind == "adversarial-gre-online":
            inst = adversarial_gre_online(n, _need_d(d), cfg["eps"])
        elif kind == "adversarial-pb-online":
            inst = adversarial_pb_online(n, _need_d(d))
        elif kind == "adversarial-any-index":
            inst = adversarial_any_index_offline(n, cfg["theta_c"], cfg["eps"])
        else:
            inst = adversarial_rewardC_online(n, _need_d(d), cfg["eps"])
        if cfg["topology"]:
            inst = inst.with_topology(Topology(cfg["topology"]))
        if cfg["window"] is not None:
            if d is not None:
                raise UsageError("give either --d or --window")
            inst = inst.with_criticality(TimeWindow(cfg["window"]))
    except ValueError as exc:
        raise UsageError(str(exc))
    doc = instance_to_json(inst)
    doc["meta"] = _meta("gen", cfg)
    _dump(doc, args.output)
    return 0


def _need_d(d):
    if d is None:
        raise UsageError("--d is required for this construction")
    return d


def cmd_run(args) -> int:
    cfg = _merge(args, {"input": None, "policy": None, "gamma": None, "price": None, "period": None,
                        "history": None, "price_table": None, "cells": None, "grid_level": None,
                        "negative": "auto", "tiebreak": "lowest"})
    if not cfg["input"] or not cfg["policy"]:
        raise UsageError("run needs -i/--input and --policy")
    inst = _load_instance(cfg["input"])
    desc = _policy_desc(cfg)
    table = _price_table(cfg, inst.topology)
    try:
        if cfg["policy"] == "ad" and table is None:
            raise UsageError("ad needs --history or --price-table")
        policy = build_policy(desc, inst, table)
        start = time.perf_counter()
        outcome = simulate(inst, policy, negative_match_allowed=_negative(cfg["negative"], inst.topology),
                           tiebreak=cfg["tiebreak"])
    except ValueError as exc:
        raise UsageError(str(exc))
    from .metrics import run_metrics
    elapsed = time.perf_counter() - start
    metrics = run_metrics(inst, outcome, solve_opt(inst), elapsed).as_row()
    if not args.timing:
        metrics.pop("wall_time")
    doc = {"meta": _meta("run", cfg), "policy": policy_label(desc), "metrics": metrics,
           "pairs": len(outcome.pairs), "solos": len(outcome.solos)}
    if args.trace:
        outcome.write_trace(args.trace)
    _dump(doc, args.output)
    return 0


def _refuse_overwrite(target, config) -> None:
    if Path(target).resolve() == Path(config).resolve():
        raise UsageError(f"output {target} would overwrite the config file")


def cmd_sweep(args) -> int:
    from .metrics import sweep, write_report
    cfg = _load_json(args.config)
    if args.seeds is not None:
        cfg["seeds"] = args.seeds
    if args.n is not None:
        cfg["n"] = args.n
    if "base_seed" not in cfg and isinstance(cfg.get("seeds", 1), int):
        cfg["base_seed"] = _default_seed()

    to_file = args.output not in (None, "-")
    json_path = args.json or (str(Path(args.output).with_suffix(".report.json")) if to_file else None)
    for target in (json_path, args.output if to_file else None):
        if target:
            _refuse_overwrite(target, args.config)

    def progress(done, total):
        print(f"\r{done}/{total} instances", end="" if done < total else "\n", file=sys.stderr)

    try:
        report = sweep(cfg, jobs=args.jobs, timing=args.timing, progress=progress)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad sweep config: {exc}")
    for fail in report.failures:
        print(f"cell {fail['policy']} @ {fail['density_or_window']} failed: "
              f"{fail['diagnostics'][0]['error']}", file=sys.stderr)
    if args.output in (None, "-"):
        sys.stdout.write(report.to_csv())
        if json_path:
            _dump(report.to_json(), json_path)
    else:
        write_report(report, args.output, json_path)
    return 3 if report.failures else 0


def cmd_duals(args) -> int:
    cfg = _merge(args, {"input": None, "history": None, "cells": None, "grid_level": None, "method": "highs"})
    if cfg["history"]:
        history = [_load_instance(p) for p in cfg["history"]]
        table = build_price_table(history, _scheme(cfg, history, history[0].topology))
        _dump({"meta": _meta("duals", cfg), "price_table": table.to_json()}, args.output)
        return 0
    if not cfg["input"]:
        raise UsageError("duals needs -i/--input or --history")
    inst = _load_instance(cfg["input"])
    lp = lp_relaxation(feasible_edges(inst), cfg["method"])
    opt = solve_opt(inst)
    _dump({"meta": _meta("duals", cfg), "lp": lp.to_json(),
           "matching": {"pairs": [list(p) for p in opt.pairs], "value": opt.value}}, args.output)
    return 0


def cmd_tune_gamma(args) -> int:
    cfg = _merge(args, {"train": None, "policy": "rbat", "price": "potential", "period": None,
                        "grid": None, "history": None, "price_table": None, "cells": None,
                        "grid_level": None})
    if not cfg["train"]:
        raise UsageError("tune-gamma needs --train files")
    if cfg["policy"] not in BATCH_MODES:
        raise UsageError("tune-gamma applies to bat, rbat or prbat")
    grid = [float(g) for g in cfg["grid"].split(",")] if isinstance(cfg["grid"], str) else cfg["grid"]
    train = [_load_instance(p) for p in cfg["train"]]
    table = _price_table(cfg, train[0].topology)

    def family(gamma):
        desc = _policy_desc({**cfg, "gamma": gamma})
        return lambda inst: build_policy(desc, inst, table)

    def run_one(inst, factory, record_trace=False):
        return simulate(inst, factory(inst), record_trace=record_trace)

    try:
        kwargs = {} if grid is None else {"grid": grid}
        best, scores = tune_gamma(train, family, simulate_fn=run_one, **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc))
    _dump({"meta": _meta("tune-gamma", cfg), "gamma": best,
           "scores": [{"gamma": g, "mean_reward": s} for g, s in scores]}, args.output)
    return 0


def cmd_verify(args) -> int:
    from .verify import CHECK_NAMES, all_hold, run_checks
    names = CHECK_NAMES if args.all or not args.check else tuple(args.check)
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        checks = run_checks(names, seed)
    except ValueError as exc:
        raise UsageError(str(exc))
    ok = all_hold(checks)
    doc = {"meta": _meta("verify", {"checks": list(names), "seed": seed}), "pass": ok,
           "results": [c.to_json() for c in checks]}
    _dump(doc, args.output)
    failed = [c for c in checks if c.asserted and not c.holds]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks hold", file=sys.stderr)
    for c in failed:
        print(f"FAIL {c.name} [{c.instance}]: observed {c.observed!r} vs bound {c.bound!r}", file=sys.stderr)
    return 0 if ok else 1


def cmd_ingest(args) -> int:
    from .ingest import ingest_orders_csv
    if not args.window > 0:
        raise UsageError("--window must be positive")
    inst, report = ingest_orders_csv(args.csv, args.window, strict=args.strict)
    doc = instance_to_json(inst)
    cfg = {"csv": args.csv, "window": args.window, "strict": args.strict}
    doc["meta"] = _meta("ingest", cfg)
    doc["meta"]["order_ids"] = report.order_ids
    doc["meta"]["rejected"] = [{"line": ln, "reason": why} for ln, why in report.rejected]
    if report.projection is not None:
        doc["meta"]["projection"] = {"kind": "equirectangular", "lng0": report.projection.lng0,
                                     "lat0": report.projection.lat0}
    _dump(doc, args.output)
    return 0


# --- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pooling-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("--kind", choices=GEN_KINDS)
    g.add_argument("--n", type=int)
    g.add_argument("--d", type=int, help="count window (default: offline)")
    g.add_argument("--window", type=float, help="time window in seconds (unit-spaced arrivals)")
    g.add_argument("--seed", type=int, help=f"default: ${SEED_ENV} or 0")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--k", type=int)
    g.add_argument("--eps", type=float)
    g.add_argument("--theta-c", dest="theta_c", type=float)
    g.add_argument("--topology", choices=[t.value for t in Topology])
    g.add_argument("--config")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="simulate one policy on an instance")
    r.add_argument("-i", "--input")
    r.add_argument("--policy", choices=POLICY_NAMES)
    r.add_argument("--gamma", type=float)
    r.add_argument("--price", choices=("potential", "hd", "ad"))
    r.add_argument("--period", type=float)
    r.add_argument("--history", nargs="+", help="instances whose duals build the ad price table")
    r.add_argument("--price-table", dest="price_table")
    r.add_argument("--cells", type=int)
    r.add_argument("--grid-level", dest="grid_level", type=int)
    r.add_argument("--negative", choices=("auto", "allow", "forbid"))
    r.add_argument("--tiebreak", choices=("lowest", "highest"))
    r.add_argument("--trace")
    r.add_argument("--timing", action="store_true", help="include wall time (breaks byte-identical reruns)")
    r.add_argument("--config")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a seeded policy/density sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--seeds", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--timing", action="store_true")
    s.add_argument("--json")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_sweep)

    d = sub.add_parser("duals", help="LP duals of an instance, or an ad price table")
    d.add_argument("-i", "--input")
    d.add_argument("--history", nargs="+")
    d.add_argument("--cells", type=int)
    d.add_argument("--grid-level", dest="grid_level", type=int)
    d.add_argument("--method", choices=("highs", "simplex"))
    d.add_argument("--config")
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_duals)

    t = sub.add_parser("tune-gamma", help="grid-search the batching price weight")
    t.add_argument("--train", nargs="+")
    t.add_argument("--policy", choices=tuple(BATCH_MODES))
    t.add_argument("--price", choices=("potential", "hd", "ad"))
    t.add_argument("--period", type=float)
    t.add_argument("--grid", help="comma-separated gammas (default 0,0.1,...,1)")
    t.add_argument("--history", nargs="+")
    t.add_argument("--price-table", dest="price_table")
    t.add_argument("--cells", type=int)
    t.add_argument("--grid-level", dest="grid_level", type=int)
    t.add_argument("--config")
    t.add_argument("-o", "--output")
    t.set_defaults(func=cmd_tune_gamma)

    v = sub.add_parser("verify", help="run bound and identity checks")
    v.add_argument("--all", action="store_true")
    v.add_argument("--check", action="append")
    v.add_argument("--seed", type=int)
    v.add_argument("-o", "--output")
    v.set_defaults(func=cmd_verify)

    i = sub.add_parser("ingest", help="convert an orders CSV to an instance")
    i.add_argument("csv")
    i.add_argument("--window", type=float, required=True)
    i.add_argument("--strict", action="store_true")
    i.add_argument("-o", "--output")
    i.set_defaults(func=cmd_ingest)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PoolingLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
