"""Per-run metrics and the seeded parameter sweep."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

from . import __version__
from .engine import MatchingOutcome, simulate
from .instance import (CountWindow, Instance, TimeWindow, gen_2d_common_origin, gen_2d_heterogeneous,
                       gen_beta_1d, gen_uniform_1d, load_instance)
from .offline.matching import MatchingSolution, solve_opt
from .policies import build_policy, policy_label
from .pricing import DEFAULT_1D_CELLS, OneDUniform, PriceTable, TwoDGrid, build_price_table, grid_covering
from .topology import Topology, solo_distance

REGRET_TOL = 1e-9
METRICS = ("reward", "opt", "regret", "ratio", "match_rate", "saving_fraction")


@dataclass(frozen=True)
class RunMetrics:
    total_reward: float
    opt_value: float
    regret: float
    ratio: float
    match_rate: float
    saving_fraction: Optional[float]
    wall_time: Optional[float] = None

    def as_row(self) -> dict:
        return {"reward": self.total_reward, "opt": self.opt_value, "regret": self.regret,
                "ratio": self.ratio, "match_rate": self.match_rate,
                "saving_fraction": self.saving_fraction, "wall_time": self.wall_time}


def total_solo_distance(inst: Instance) -> Optional[float]:
    if not inst.topology.is_pooling:
        return None
    return math.fsum(solo_distance(inst.topology, t) for t in inst.types)


def _ratio(alg: float, opt: float) -> float:
    if opt == 0:
        if alg > REGRET_TOL:
            raise ValueError(f"policy reward {alg} exceeds a zero optimum")
        return 1.0
    return alg / opt


def _summarise(inst: Instance, alg: float, matched_jobs: int, opt: float,
               wall_time: Optional[float]) -> RunMetrics:
    solo = total_solo_distance(inst)
    saving = None if solo is None else (alg / solo if solo > 0 else 0.0)
    return RunMetrics(alg, opt, opt - alg, _ratio(alg, opt), matched_jobs / inst.n, saving, wall_time)


def run_metrics(inst: Instance, outcome: MatchingOutcome, opt: MatchingSolution,
                wall_time: Optional[float] = None) -> RunMetrics:
    return _summarise(inst, outcome.total_reward, outcome.matched_jobs, opt.value, wall_time)


def opt_metrics(inst: Instance, opt: MatchingSolution) -> RunMetrics:
    """The hindsight optimum scored as if it were a policy."""
    return _summarise(inst, opt.value, 2 * len(opt.pairs), opt.value, None)


# --- sweeps ------------------------------------------------------------------

GENERATORS = {
    "uniform1d": lambda n, seed, cfg: gen_uniform_1d(n, seed, topology=Topology(cfg.get("topology", "min_common_origin"))),
    "beta1d": lambda n, seed, cfg: gen_beta_1d(n, cfg.get("alpha", 0.5), cfg.get("beta", 2.0), seed,
                                               topology=Topology(cfg.get("topology", "min_common_origin"))),
    "2d-common": lambda n, seed, cfg: gen_2d_common_origin(n, seed),
    "2d-het": lambda n, seed, cfg: gen_2d_heterogeneous(n, seed),
}


@dataclass(frozen=True)
class Cell:
    policy: str
    level: float
    metric: str
    mean: float
    std: float
    n_seeds: int


@dataclass
class SweepReport:
    config: dict
    cells: list[Cell]
    failures: list[dict]
    timing: Optional[list[Cell]] = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["policy", "density_or_window", "metric", "mean", "std", "n_seeds"])
        for c in self.cells + (self.timing or []):
            w.writerow([c.policy, repr(c.level), c.metric, repr(c.mean), repr(c.std), c.n_seeds])
        return buf.getvalue()

    def to_json(self) -> dict:
        doc = {"tool": "pooling-lab", "version": __version__, "config": self.config,
               "cells": [asdict(c) for c in self.cells], "failures": self.failures}
        if self.timing is not None:
            doc["timing"] = [asdict(c) for c in self.timing]
        return doc

    def lookup(self, policy: str, level: float, metric: str) -> Cell:
        for c in self.cells:
            if c.policy == policy and c.level == level and c.metric == metric:
                return c
        raise KeyError((policy, level, metric))


def mean_std(xs: list[float]) -> tuple[float, float]:
    """Mean and sample standard deviation, exactly rounded and order independent."""
    m = math.fsum(xs) / len(xs)
    if len(xs) < 2:
        return m, 0.0
    return m, math.sqrt(math.fsum((x - m) ** 2 for x in xs) / (len(xs) - 1))


def _levels(cfg: dict) -> tuple[str, list]:
    if "densities" in cfg and "windows" in cfg:
        raise ValueError("give either densities or windows, not both")
    if "densities" in cfg:
        return "density", [int(d) for d in cfg["densities"]]
    if "windows" in cfg:
        return "window", [float(w) for w in cfg["windows"]]
    raise ValueError("sweep config needs densities or windows")


def _seeds(cfg: dict) -> list[int]:
    seeds = cfg.get("seeds", 1)
    if isinstance(seeds, int):
        return [int(cfg.get("base_seed", 0)) + i for i in range(seeds)]
    return [int(s) for s in seeds]


def _criticality(kind: str, level):
    return CountWindow(level) if kind == "density" else TimeWindow(level)


def _base_instances(cfg: dict) -> list[tuple[str, Instance]]:
    gen = cfg["generator"]
    if gen == "instances":
        return [(str(p), load_instance(p)) for p in cfg["instance_files"]]
    if gen not in GENERATORS:
        raise ValueError(f"unknown generator {gen!r}; expected one of {', '.join(GENERATORS)} or 'instances'")
    return [(str(s), GENERATORS[gen](int(cfg["n"]), s, cfg)) for s in _seeds(cfg)]


def _scheme_for(cfg: dict, history: list[Instance]):
    if history[0].topology.is_1d:
        return OneDUniform(int(cfg.get("ad_cells", DEFAULT_1D_CELLS)))
    level = int(cfg.get("ad_grid_level", 3))
    if cfg["generator"] == "instances":
        return grid_covering(history, level)
    return TwoDGrid(level)


def _price_tables(cfg: dict, kind: str, level, bases: list[tuple[str, Instance]]) -> list[Optional[PriceTable]]:
    """AD tables per instance: synthetic sweeps learn one table from a separate
    history sample; file sweeps use every other file (leave one out)."""
    needs = any((s if isinstance(s, str) else s["name"]) == "ad"
                or (isinstance(s, dict) and s.get("price") == "ad") for s in cfg["policies"])
    if not needs:
        return [None] * len(bases)
    crit = _criticality(kind, level)
    if cfg["generator"] == "instances":
        insts = [b.with_criticality(crit) for _, b in bases]
        if len(insts) < 2:
            raise ValueError("leave-one-out price tables need at least two instance files")
        tables = []
        for i in range(len(insts)):
            hist = insts[:i] + insts[i + 1:]
            tables.append(build_price_table(hist, _scheme_for(cfg, hist)))
        return tables
    hist_seed = int(cfg.get("history_seed", 1_000_000))
    count = int(cfg.get("history", 20))
    hist = [GENERATORS[cfg["generator"]](int(cfg["n"]), hist_seed + h, cfg).with_criticality(crit)
            for h in range(count)]
    table = build_price_table(hist, _scheme_for(cfg, hist))
    return [table] * len(bases)


def _run_task(task) -> list:
    """All policies on one instance. Returns (label, metrics-row | error) tuples."""
    inst, descs, table, timing = task
    rows = []
    opt = solve_opt(inst)
    for desc in descs:
        label = policy_label(desc)
        try:
            if (desc if isinstance(desc, str) else desc["name"]) == "opt":
                rows.append((label, opt_metrics(inst, opt).as_row()))
                continue
            policy = build_policy(desc, inst, table)
            start = time.perf_counter()
            outcome = simulate(inst, policy, record_trace=False)
            elapsed = time.perf_counter() - start
            rows.append((label, run_metrics(inst, outcome, opt, elapsed if timing else None).as_row()))
        except Exception as exc:  # recorded per cell, see sweep()
            rows.append((label, f"{type(exc).__name__}: {exc}"))
    return rows


def sweep(cfg: dict, jobs: int = 1, timing: bool = False, progress=None) -> SweepReport:
    kind, levels = _levels(cfg)
    descs = list(cfg["policies"])
    labels = [policy_label(s) for s in descs]
    if len(set(labels)) != len(labels):
        raise ValueError(f"policy labels must be unique, got {labels}")
    bases = _base_instances(cfg)
    tasks, keys = [], []
    for level in levels:
        tables = _price_tables(cfg, kind, level, bases)
        for (tag, base), table in zip(bases, tables):
            tasks.append((base.with_criticality(_criticality(kind, level)), descs, table, timing))
            keys.append((level, tag))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        results = []
        for i, task in enumerate(tasks):
            results.append(_run_task(task))
            if progress:
                progress(i + 1, len(tasks))
    # merge in (level, policy, seed) order so output never depends on scheduling
    collected: dict = {}
    for (level, tag), rows in zip(keys, results):
        for label, row in rows:
            collected.setdefault((level, label), []).append((tag, row))
    cells, timing_cells, failures = [], [], []
    for level in levels:
        for label in labels:
            runs = collected.get((level, label), [])
            errors = [(tag, r) for tag, r in runs if isinstance(r, str)]
            if errors:
                failures.append({"policy": label, "density_or_window": level,
                                 "diagnostics": [{"instance": t, "error": e} for t, e in errors]})
                continue
            for metric in METRICS:
                xs = [r[metric] for _, r in runs if r[metric] is not None]
                if xs:
                    cells.append(Cell(label, level, metric, *mean_std(xs), len(xs)))
            if timing and label != "opt":
                xs = [r["wall_time"] for _, r in runs if r["wall_time"] is not None]
                if xs:
                    timing_cells.append(Cell(label, level, "wall_time", *mean_std(xs), len(xs)))
    return SweepReport(cfg, cells, failures, timing_cells if timing else None)


def write_report(report: SweepReport, csv_path, json_path=None) -> None:
    with open(csv_path, "w", newline="") as fh:
        fh.write(report.to_csv())
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(report.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
