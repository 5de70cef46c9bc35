"""Per-cell average shadow prices learned from historical instances."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

from .instance import Instance
from .offline.lp import hindsight_duals
from .topology import JobType, OneD, TwoD

DEFAULT_1D_CELLS = 100


@dataclass(frozen=True)
class OneDUniform:
    cells: int

    def __post_init__(self):
        if self.cells < 1:
            raise ValueError(f"need at least one cell, got {self.cells}")

    def key(self, t: JobType) -> str:
        if not isinstance(t, OneD):
            raise ValueError("OneDUniform cells only apply to 1D types")
        return str(min(int(t.value * self.cells), self.cells - 1))

    def coarser(self) -> "OneDUniform | None":
        return OneDUniform(self.cells // 2) if self.cells > 1 else None

    def to_json(self) -> dict:
        return {"kind": "oned", "cells": self.cells}


@dataclass(frozen=True)
class TwoDGrid:
    """Square grid with 2^level cells per side over [x0, x0+size] x [y0, y0+size].

    A 2D job falls in the cell given by its (origin cell, destination cell) pair.
    Points outside the box are clamped to the border cells.
    """

    level: int
    x0: float = 0.0
    y0: float = 0.0
    size: float = 1.0

    def __post_init__(self):
        if self.level < 0 or not self.size > 0:
            raise ValueError(f"bad grid (level={self.level}, size={self.size})")

    def _cell(self, x: float, y: float) -> tuple[int, int]:
        side = 2 ** self.level
        edge = self.size / side
        cx = min(max(int(math.floor((x - self.x0) / edge)), 0), side - 1)
        cy = min(max(int(math.floor((y - self.y0) / edge)), 0), side - 1)
        return cx, cy

    def key(self, t: JobType) -> str:
        if not isinstance(t, TwoD):
            raise ValueError("TwoDGrid cells only apply to 2D types")
        return "%d,%d,%d,%d" % (*self._cell(*t.origin), *self._cell(*t.dest))

    def coarser(self) -> "TwoDGrid | None":
        if self.level == 0:
            return None
        return TwoDGrid(self.level - 1, self.x0, self.y0, self.size)

    def to_json(self) -> dict:
        return {"kind": "grid", "level": self.level, "x0": self.x0, "y0": self.y0, "size": self.size}


CellScheme = OneDUniform | TwoDGrid


def scheme_from_json(doc: dict) -> CellScheme:
    if doc["kind"] == "oned":
        return OneDUniform(int(doc["cells"]))
    if doc["kind"] == "grid":
        return TwoDGrid(int(doc["level"]), float(doc["x0"]), float(doc["y0"]), float(doc["size"]))
    raise ValueError(f"unknown cell scheme {doc['kind']!r}")


def grid_covering(instances: list[Instance], level: int) -> TwoDGrid:
    """Smallest square grid (anchored at the lower-left corner) covering all trips."""
    xs, ys = [], []
    for inst in instances:
        for t in inst.types:
            xs += [t.origin.x, t.dest.x]
            ys += [t.origin.y, t.dest.y]
    size = max(max(xs) - min(xs), max(ys) - min(ys))
    return TwoDGrid(level, min(xs), min(ys), size if size > 0 else 1.0)


@dataclass(frozen=True)
class PriceTable:
    levels: tuple[tuple[CellScheme, dict], ...]  # finest first
    global_mean: float

    @property
    def scheme(self) -> CellScheme:
        return self.levels[0][0]

    def lookup(self, t: JobType) -> float:
        for scheme, means in self.levels:
            value = means.get(scheme.key(t))
            if value is not None:
                return value
        return self.global_mean

    def to_json(self) -> dict:
        return {
            "global_mean": self.global_mean,
            "levels": [{"scheme": s.to_json(), "means": dict(sorted(m.items()))} for s, m in self.levels],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PriceTable":
        levels = tuple((scheme_from_json(lv["scheme"]), {k: float(v) for k, v in lv["means"].items()})
                       for lv in doc["levels"])
        return cls(levels, float(doc["global_mean"]))


def table_from_samples(samples: list[tuple[JobType, float]], scheme: CellScheme) -> PriceTable:
    if not samples:
        raise ValueError("cannot build a price table without samples")
    levels = []
    s: CellScheme | None = scheme
    while s is not None:
        groups: dict[str, list[float]] = defaultdict(list)
        for t, lam in samples:
            groups[s.key(t)].append(lam)
        levels.append((s, {k: math.fsum(v) / len(v) for k, v in groups.items()}))
        s = s.coarser()
    return PriceTable(tuple(levels), math.fsum(lam for _, lam in samples) / len(samples))


def build_price_table(history: list[Instance], scheme: CellScheme) -> PriceTable:
    """Average the hindsight duals of every historical job within each cell."""
    if not history:
        raise ValueError("history must contain at least one instance")
    samples = []
    for inst in history:
        lam = hindsight_duals(inst)
        samples.extend(zip(inst.types, lam.tolist()))
    return table_from_samples(samples, scheme)
