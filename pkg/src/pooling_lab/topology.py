"""Reward functions, potentials and solo trip lengths for the four pooling topologies.

1D types are plain destinations in [0, 1]. 2D types carry an origin and a
destination in the plane; the reward of pooling two 2D jobs is the distance
saved by the best pickup-before-dropoff route versus two solo trips.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True, slots=True)
class OneD:
    value: float

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0):
            raise ValueError(f"1D type must lie in [0, 1], got {self.value!r}")


@dataclass(frozen=True, slots=True)
class TwoD:
    origin: Point2
    dest: Point2

    def __post_init__(self):
        coords = (*self.origin, *self.dest)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"2D type has non-finite coordinates: {coords!r}")


JobType = OneD | TwoD


class Topology(str, Enum):
    MIN_COMMON_ORIGIN = "min_common_origin"
    PROXIMITY = "proximity"
    SEPARATION = "separation"
    POOL_2D = "pool_2d"

    @property
    def is_1d(self) -> bool:
        return self is not Topology.POOL_2D

    @property
    def is_pooling(self) -> bool:
        """Topologies where a solo trip length exists (saving fraction is defined)."""
        return self in (Topology.MIN_COMMON_ORIGIN, Topology.POOL_2D)


def _dist(ax: float, ay: float, bx: float, by: float) -> float:
    dx = bx - ax
    dy = by - ay
    # kept as sqrt(dx*dx + dy*dy) so the numpy kernel below rounds identically
    return math.sqrt(dx * dx + dy * dy)


def check_type(top: Topology, a: JobType) -> None:
    expected = OneD if top.is_1d else TwoD
    if not isinstance(a, expected):
        raise ValueError(f"{top.value} expects {expected.__name__} types, got {type(a).__name__}")


def pool2d_reward(a: TwoD, b: TwoD) -> float:
    (ox, oy), (dx, dy) = a.origin, a.dest
    (px, py), (ex, ey) = b.origin, b.dest
    solo_a = _dist(ox, oy, dx, dy)
    solo_b = _dist(px, py, ex, ey)
    middle = min(solo_a, _dist(px, py, dx, dy), _dist(ox, oy, ex, ey), solo_b)
    pooled = _dist(ox, oy, px, py) + middle + _dist(dx, dy, ex, ey)
    return solo_a + solo_b - pooled


def reward(top: Topology, a: JobType, b: JobType) -> float:
    check_type(top, a)
    check_type(top, b)
    if top is Topology.POOL_2D:
        return pool2d_reward(a, b)
    x, y = a.value, b.value
    if top is Topology.MIN_COMMON_ORIGIN:
        return min(x, y)
    if top is Topology.PROXIMITY:
        return 1.0 - abs(x - y)
    return abs(x - y)


def potential(top: Topology, a: JobType) -> float:
    check_type(top, a)
    if top is Topology.POOL_2D:
        return solo_distance(top, a) / 2
    x = a.value
    if top is Topology.MIN_COMMON_ORIGIN:
        return x / 2
    if top is Topology.PROXIMITY:
        return 0.5
    return max(x, 1.0 - x) / 2


def solo_distance(top: Topology, a: JobType) -> Optional[float]:
    """Length of a solo trip, or None where the topology has no notion of one."""
    check_type(top, a)
    if top is Topology.MIN_COMMON_ORIGIN:
        return a.value
    if top is Topology.POOL_2D:
        return _dist(*a.origin, *a.dest)
    return None


# --- vectorised kernels over a packed type matrix ---------------------------
#
# 1D instances pack to an (n,) array of values, 2D instances to an (n, 4)
# array of (ox, oy, dx, dy). The kernels perform the same floating point
# operations in the same order as the scalar functions above, so results are
# bit-identical.


def pack_types(top: Topology, types) -> np.ndarray:
    if top.is_1d:
        return np.array([t.value for t in types], dtype=float)
    return np.array([(*t.origin, *t.dest) for t in types], dtype=float).reshape(-1, 4)


def _vdist(ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    return np.sqrt(dx * dx + dy * dy)


def reward_row(top: Topology, packed: np.ndarray, j: int, ks: np.ndarray) -> np.ndarray:
    """Rewards r(type j, type k) for every index k in ``ks`` (0-based)."""
    if top is Topology.POOL_2D:
        ox, oy, dx, dy = packed[j]
        other = packed[ks]
        px, py, ex, ey = other[:, 0], other[:, 1], other[:, 2], other[:, 3]
        solo_a = _vdist(ox, oy, dx, dy)
        solo_b = _vdist(px, py, ex, ey)
        middle = np.minimum(
            np.minimum(np.minimum(solo_a, _vdist(px, py, dx, dy)), _vdist(ox, oy, ex, ey)), solo_b
        )
        pooled = _vdist(ox, oy, px, py) + middle + _vdist(dx, dy, ex, ey)
        return solo_a + solo_b - pooled
    x = packed[j]
    y = packed[ks]
    if top is Topology.MIN_COMMON_ORIGIN:
        return np.minimum(x, y)
    if top is Topology.PROXIMITY:
        return 1.0 - np.abs(x - y)
    return np.abs(x - y)


def potential_vector(top: Topology, types) -> np.ndarray:
    return np.array([potential(top, t) for t in types], dtype=float)
