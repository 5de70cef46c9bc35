"""Instances: arrival sequences with a criticality model and a reward topology."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .topology import OneD, Point2, Topology, TwoD, check_type, JobType


@dataclass(frozen=True)
class CountWindow:
    d: int

    def __post_init__(self):
        if isinstance(self.d, bool) or not isinstance(self.d, int) or self.d < 1:
            raise ValueError(f"count window needs an integer d >= 1, got {self.d!r}")


@dataclass(frozen=True)
class TimeWindow:
    W: float

    def __post_init__(self):
        if not (math.isfinite(self.W) and self.W > 0):
            raise ValueError(f"time window must be positive, got {self.W!r}")


Criticality = CountWindow | TimeWindow


@dataclass(frozen=True)
class Arrival:
    id: int
    jtype: JobType
    timestamp: Optional[float] = None


@dataclass(frozen=True)
class Instance:
    arrivals: tuple[Arrival, ...]
    criticality: Criticality
    topology: Topology
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "arrivals", tuple(self.arrivals))
        if not self.arrivals:
            raise ValueError("an instance needs at least one job")
        timed = isinstance(self.criticality, TimeWindow)
        last_t = -math.inf
        for i, a in enumerate(self.arrivals, start=1):
            if a.id != i:
                raise ValueError(f"arrival ids must be 1..n in order; position {i} has id {a.id}")
            check_type(self.topology, a.jtype)
            if timed:
                if a.timestamp is None or not math.isfinite(a.timestamp):
                    raise ValueError(f"job {i} needs a finite timestamp under a time window")
                if a.timestamp < last_t:
                    raise ValueError(f"timestamps must be non-decreasing (job {i})")
                last_t = a.timestamp

    @property
    def n(self) -> int:
        return len(self.arrivals)

    @property
    def types(self) -> list[JobType]:
        return [a.jtype for a in self.arrivals]

    @property
    def values(self) -> np.ndarray:
        """1D types as a float array (index 0 is job 1)."""
        if not self.topology.is_1d:
            raise ValueError("values are only defined for 1D topologies")
        return np.array([a.jtype.value for a in self.arrivals], dtype=float)

    @property
    def timestamps(self) -> list[Optional[float]]:
        return [a.timestamp for a in self.arrivals]

    def is_offline(self) -> bool:
        c = self.criticality
        return isinstance(c, CountWindow) and c.d >= self.n - 1

    def with_criticality(self, criticality: Criticality) -> "Instance":
        arrivals = self.arrivals
        if isinstance(criticality, TimeWindow) and any(a.timestamp is None for a in arrivals):
            # untimed instances get unit spacing, so W seconds is roughly W arrivals
            arrivals = tuple(Arrival(a.id, a.jtype, float(a.id - 1)) for a in arrivals)
        return Instance(arrivals, criticality, self.topology, self.seed)

    def with_topology(self, topology: Topology) -> "Instance":
        return Instance(self.arrivals, self.criticality, topology, self.seed)


def offline(n: int) -> CountWindow:
    """Count window wide enough that every pair of jobs overlaps."""
    return CountWindow(max(n, 1))


def from_values(values: Iterable[float], topology: Topology = Topology.MIN_COMMON_ORIGIN,
                d: Optional[int] = None, seed: Optional[int] = None) -> Instance:
    vals = [float(v) for v in values]
    arrivals = tuple(Arrival(i, OneD(v)) for i, v in enumerate(vals, start=1))
    crit = offline(len(vals)) if d is None else CountWindow(d)
    return Instance(arrivals, crit, topology, seed)


def from_trips(trips: Sequence[tuple], d: Optional[int] = None, timestamps=None,
               window: Optional[float] = None, seed: Optional[int] = None) -> Instance:
    """Build a Pool2D instance from ((ox, oy), (dx, dy)) pairs."""
    arrivals = []
    for i, (o, dst) in enumerate(trips, start=1):
        t = None if timestamps is None else float(timestamps[i - 1])
        arrivals.append(Arrival(i, TwoD(Point2(*map(float, o)), Point2(*map(float, dst))), t))
    if window is not None:
        crit: Criticality = TimeWindow(window)
    else:
        crit = offline(len(arrivals)) if d is None else CountWindow(d)
    return Instance(tuple(arrivals), crit, Topology.POOL_2D, seed)


# --- random generators -------------------------------------------------------
#
# Every generator draws from numpy's PCG64 seeded through SeedSequence(seed);
# sweeps derive the seed of instance i as base_seed + i.


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _check_n(n: int) -> None:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")


def gen_uniform_1d(n: int, seed: int, d: Optional[int] = None,
                   topology: Topology = Topology.MIN_COMMON_ORIGIN) -> Instance:
    _check_n(n)
    return from_values(rng_for(seed).random(n), topology, d, seed)


def gen_beta_1d(n: int, alpha: float, beta: float, seed: int, d: Optional[int] = None,
                topology: Topology = Topology.MIN_COMMON_ORIGIN) -> Instance:
    _check_n(n)
    if not (alpha > 0 and beta > 0):
        raise ValueError(f"Beta shapes must be positive, got ({alpha}, {beta})")
    vals = np.clip(rng_for(seed).beta(alpha, beta, size=n), 0.0, 1.0)
    return from_values(vals, topology, d, seed)


def gen_2d_common_origin(n: int, seed: int, d: Optional[int] = None) -> Instance:
    _check_n(n)
    dest = rng_for(seed).random((n, 2))
    trips = [((0.0, 0.0), tuple(row)) for row in dest]
    return from_trips(trips, d=d, seed=seed)


def gen_2d_heterogeneous(n: int, seed: int, d: Optional[int] = None) -> Instance:
    _check_n(n)
    pts = rng_for(seed).random((n, 4))
    trips = [((r[0], r[1]), (r[2], r[3])) for r in pts]
    return from_trips(trips, d=d, seed=seed)


# --- worst-case constructions -------------------------------------------------


def _descending_in_band(lo: float, hi: float, m: int) -> list[float]:
    """m strictly decreasing values evenly spaced strictly inside (lo, hi)."""
    return [hi - (hi - lo) * i / (m + 1) for i in range(1, m + 1)]


def adversarial_gre_offline(n: int, eps: float) -> Instance:
    """n/2 decreasing low types below eps followed by n/2 jobs of type 1.

    Greedy pairs every low job with a high one; the optimum pairs lows together
    and highs together.
    """
    if n < 4 or n % 4:
        raise ValueError(f"n must be a positive multiple of 4, got {n}")
    if not 0 < eps < 1 / 3:
        raise ValueError(f"eps must lie in (0, 1/3), got {eps}")
    lows = _descending_in_band(eps / 2, eps, n // 2)
    return from_values(lows + [1.0] * (n // 2))


def _pb_offline_values(k: int) -> list[Fraction]:
    vals = [Fraction(1, 2), Fraction(0), Fraction(1), Fraction(0)]
    for step in range(1, k + 1):
        base = [Fraction(1, 2), Fraction(0), Fraction(1), Fraction(0)]
        fresh = [base[r] / 2 ** (step + 1) + Fraction(s, 2 ** step)
                 for s in range(2 ** step) for r in range(4)]
        vals = fresh + vals
    return vals


def adversarial_pb_offline(k: int) -> Instance:
    """Recursive instance of size 2^(k+3) - 4 on which PB loses a log factor.

    Each step prepends 2^(k+2) jobs that repeat the four-job base pattern
    compressed into consecutive dyadic intervals of width 2^-k.
    """
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    return from_values(float(v) for v in _pb_offline_values(k))


def adversarial_gre_online(n: int, d: int, eps: float) -> Instance:
    if (d + 1) % 4:
        raise ValueError(f"d+1 must be divisible by 4, got d={d}")
    if n < d + 1 or n % (d + 1):
        raise ValueError(f"n must be a positive multiple of d+1={d + 1}, got {n}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    half = (d + 1) // 2
    vals: list[float] = []
    for t in range(n // (d + 1)):
        vals += _descending_in_band(eps / 2 ** (t + 1), eps / 2 ** t, half)
        vals += [1.0] * half
    return from_values(vals, d=d)


def _pb_online_k(d: int) -> int:
    k = round(math.log2(d + 5)) - 3
    if k < 0 or 2 ** (k + 3) - 4 != d + 1:
        raise ValueError(f"d+1 must equal 2^(k+3) - 4 for some k >= 0, got d={d}")
    return k


def adversarial_pb_online(n: int, d: int) -> Instance:
    """Batches of size d+1 alternating between a scaled and a scaled+shifted copy
    of the offline PB construction."""
    k = _pb_online_k(d)
    if n < d + 1 or n % (d + 1):
        raise ValueError(f"n must be a positive multiple of d+1={d + 1}, got {n}")
    base = _pb_offline_values(k)
    vals: list[float] = []
    for t in range(1, n // (d + 1) + 1):
        shift = Fraction(2, 3) if t % 2 == 0 else Fraction(0)
        vals += [float(v / 3 + shift) for v in base]
    return from_values(vals, d=d)


def adversarial_any_index_offline(n: int, theta_c: float, eps: float = 0.1,
                                  topology: Topology = Topology.SEPARATION) -> Instance:
    """n/4 jobs at theta_c, n/2 at 0, n/4 at 1 (with theta_c = 0: eps, then 1s, then 0s)."""
    if n < 4 or n % 4:
        raise ValueError(f"n must be a positive multiple of 4, got {n}")
    q = n // 4
    if theta_c > 0:
        if theta_c > 1:
            raise ValueError(f"theta_c must lie in (0, 1], got {theta_c}")
        vals = [theta_c] * q + [0.0] * (2 * q) + [1.0] * q
    else:
        if not 0 < eps <= 1:
            raise ValueError(f"eps must lie in (0, 1], got {eps}")
        vals = [eps] * q + [1.0] * (2 * q) + [0.0] * q
    return from_values(vals, topology)


def adversarial_rewardC_online(n: int, d: int, eps: float,
                               topology: Topology = Topology.SEPARATION) -> Instance:
    if (d + 1) % 4:
        raise ValueError(f"d+1 must be divisible by 4, got d={d}")
    period = 2 * (d + 1)
    if n < period or n % period:
        raise ValueError(f"n must be a positive multiple of 2(d+1)={period}, got {n}")
    if not 0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 1/2), got {eps}")
    quarter = (d + 1) // 4
    block = []
    for j in range(1, period + 1):
        if j <= quarter:
            block.append(0.5)
        elif j <= 3 * quarter:
            block.append(eps)
        elif d + 1 < j <= 6 * quarter:
            block.append(0.0)
        else:
            block.append(1.0)
    return from_values(block * (n // period), topology, d=d)


def batches(inst: Instance) -> list[list[int]]:
    """Consecutive blocks of d+1 job ids (the last block may be shorter)."""
    if not isinstance(inst.criticality, CountWindow):
        raise ValueError("batches are defined for count-window instances only")
    size = inst.criticality.d + 1
    return [list(range(s, min(s + size, inst.n + 1))) for s in range(1, inst.n + 1, size)]


# --- JSON ----------------------------------------------------------------------


def _type_to_json(t: JobType) -> dict:
    if isinstance(t, OneD):
        return {"value": t.value}
    return {"origin": list(t.origin), "dest": list(t.dest)}


def _type_from_json(doc: dict) -> JobType:
    if "value" in doc:
        return OneD(float(doc["value"]))
    return TwoD(Point2(*map(float, doc["origin"])), Point2(*map(float, doc["dest"])))


def criticality_to_json(c: Criticality) -> dict:
    if isinstance(c, CountWindow):
        return {"kind": "count", "d": c.d}
    return {"kind": "time", "W": c.W}


def criticality_from_json(doc: dict) -> Criticality:
    if doc["kind"] == "count":
        return CountWindow(int(doc["d"]))
    if doc["kind"] == "time":
        return TimeWindow(float(doc["W"]))
    raise ValueError(f"unknown criticality kind {doc['kind']!r}")


def instance_to_json(inst: Instance) -> dict:
    arrivals = []
    for a in inst.arrivals:
        row = {"id": a.id}
        if a.timestamp is not None:
            row["t"] = a.timestamp
        row["type"] = _type_to_json(a.jtype)
        arrivals.append(row)
    return {
        "topology": inst.topology.value,
        "criticality": criticality_to_json(inst.criticality),
        "seed": inst.seed,
        "arrivals": arrivals,
    }


def instance_from_json(doc: dict) -> Instance:
    arrivals = tuple(
        Arrival(int(r["id"]), _type_from_json(r["type"]), None if r.get("t") is None else float(r["t"]))
        for r in doc["arrivals"]
    )
    return Instance(arrivals, criticality_from_json(doc["criticality"]),
                    Topology(doc["topology"]), doc.get("seed"))


def dump_instance(inst: Instance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_json(inst), fh, indent=None, separators=(",", ":"))
        fh.write("\n")


def load_instance(path) -> Instance:
    with open(path) as fh:
        return instance_from_json(json.load(fh))
