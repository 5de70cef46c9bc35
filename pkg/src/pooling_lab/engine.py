"""Event-driven simulation of online dispatch policies.

Count-window instances follow the arrival-indexed loop: at step t job t
arrives and job t - d becomes critical. Time-window instances process
arrivals at t_j and criticalities at t_j + W in time order, with arrivals
first on ties (and periodic batching epochs between the two).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractViolation
from .instance import CountWindow, Instance
from .policies import BatchContext, BatchDispatch, BatchPolicy, IndexPolicy, Policy
from .topology import Topology, pack_types, reward_row

ARRIVAL, EPOCH, CRITICAL = 0, 1, 2
# index values within TIE_TOL * (|r| + |price|) of the maximum count as tied, so
# the slack tracks the rounding error of r - price; constructions built from
# thirds rely on exact ties that rounding would otherwise break arbitrarily
TIE_TOL = 1e-12


@dataclass(frozen=True)
class MatchWith:
    k: int


@dataclass(frozen=True)
class DispatchAlone:
    pass


Decision = MatchWith | DispatchAlone | BatchDispatch


@dataclass(frozen=True)
class TraceEvent:
    step: int
    clock: float
    event: str  # "critical" or "epoch"
    job: Optional[int]
    available: tuple[int, ...]
    decision: Decision

    def to_json(self) -> dict:
        d = self.decision
        if isinstance(d, MatchWith):
            dec = {"match": d.k}
        elif isinstance(d, DispatchAlone):
            dec = {"solo": True}
        else:
            dec = {"pairs": [list(p) for p in d.pairs], "solos": list(d.solos)}
        return {"step": self.step, "clock": self.clock, "event": self.event, "job": self.job,
                "available": list(self.available), "decision": dec}


@dataclass
class MatchingOutcome:
    n: int
    policy: str = ""
    topology: Optional[Topology] = None
    pairs: list[tuple[int, int, float]] = field(default_factory=list)
    solos: list[int] = field(default_factory=list)
    # jobs matched at their own criticality, mapped to their partner
    critical_matches: dict[int, int] = field(default_factory=dict)
    trace: list[TraceEvent] = field(default_factory=list)

    @property
    def total_reward(self) -> float:
        return math.fsum(r for _, _, r in self.pairs)

    @property
    def matched_jobs(self) -> int:
        return 2 * len(self.pairs)

    def pair_set(self) -> set[tuple[int, int]]:
        return {(min(a, b), max(a, b)) for a, b, _ in self.pairs}

    def write_trace(self, path) -> None:
        with open(path, "w") as fh:
            for ev in self.trace:
                fh.write(json.dumps(ev.to_json(), separators=(",", ":")) + "\n")


def default_negative_allowed(top: Topology) -> bool:
    return top.is_1d


class _Run:
    def __init__(self, inst: Instance, policy: Policy, negative_allowed: bool, tiebreak: str,
                 record_trace: bool):
        if policy.topology is not None and policy.topology is not inst.topology:
            raise ValueError(f"policy is for {policy.topology.value}, instance is {inst.topology.value}")
        if tiebreak not in ("lowest", "highest"):
            raise ValueError(f"unknown tie-break rule {tiebreak!r}")
        self.inst = inst
        self.policy = policy
        self.negative_allowed = negative_allowed
        self.tiebreak = tiebreak
        self.record_trace = record_trace
        self.packed = pack_types(inst.topology, inst.types)
        self.prices = policy.prepare(inst)
        self.available: dict[int, None] = {}  # insertion order == id order
        self.out = MatchingOutcome(inst.n, policy.name, inst.topology)
        self.step = 0

    # -- bookkeeping --

    def _log(self, clock, event, job, decision, snapshot):
        if self.record_trace:
            self.out.trace.append(TraceEvent(self.step, clock, event, job, snapshot, decision))

    def _pair(self, a: int, b: int, reward: float) -> None:
        del self.available[a]
        del self.available[b]
        self.out.pairs.append((a, b, reward))

    def _solo(self, a: int) -> None:
        del self.available[a]
        self.out.solos.append(a)

    # -- decisions --

    def _index_choice(self, j: int) -> Decision:
        cands = [k for k in self.available if k != j]
        if not cands:
            return DispatchAlone()
        ks = np.asarray(cands) - 1
        r = reward_row(self.inst.topology, self.packed, j - 1, ks)
        p = self.prices[ks]
        q = r - p
        if not self.negative_allowed:
            q = np.where(r >= 0, q, -np.inf)
            if not np.isfinite(q).any():
                return DispatchAlone()
        scale = np.abs(r) + np.abs(p)
        i = int(np.argmax(q))
        tied = q >= q[i] - TIE_TOL * (scale + scale[i])
        if self.tiebreak == "lowest":
            idx = int(np.argmax(tied))
        else:
            idx = len(q) - 1 - int(np.argmax(tied[::-1]))
        return MatchWith(cands[idx])

    def _apply_index(self, clock, j: int) -> None:
        snapshot = tuple(self.available) if self.record_trace else ()
        decision = self._index_choice(j)
        if isinstance(decision, MatchWith):
            k = decision.k
            r = float(reward_row(self.inst.topology, self.packed, j - 1, np.array([k - 1]))[0])
            self._pair(j, k, r)
            self.out.critical_matches[j] = k
        else:
            self._solo(j)
        self._log(clock, "critical", j, decision, snapshot)

    def _apply_batch(self, clock, event: str, job: Optional[int], critical: frozenset) -> None:
        snapshot = tuple(self.available)
        ctx = BatchContext(snapshot, critical, self.packed, self.inst.topology, self.prices)
        decision = self.policy.decide(ctx)
        if not isinstance(decision, BatchDispatch):
            raise ContractViolation(f"batch policy returned {decision!r}")
        seen = set()
        for a, b in decision.pairs:
            for x in (a, b):
                if x not in self.available or x in seen:
                    raise ContractViolation(f"job {x} is not available for dispatch")
                seen.add(x)
        for a in decision.solos:
            if a not in self.available or a in seen:
                raise ContractViolation(f"job {a} is not available for dispatch")
            seen.add(a)
        missing = critical - seen
        if missing:
            raise ContractViolation(f"critical jobs {sorted(missing)} were left undispatched")
        for a, b in decision.pairs:
            if b in critical and a not in critical:
                a, b = b, a
            r = float(reward_row(self.inst.topology, self.packed, a - 1, np.array([b - 1]))[0])
            if not self.negative_allowed and r < 0:
                self._solo(a)
                self._solo(b)
                continue
            self._pair(a, b, r)
            if a in critical:
                self.out.critical_matches[a] = b
        for a in decision.solos:
            self._solo(a)
        self._log(clock, event, job, decision, snapshot if self.record_trace else ())

    def _critical(self, clock, j: int) -> None:
        if j not in self.available:
            return
        if isinstance(self.policy, BatchPolicy):
            self._apply_batch(clock, "critical", j, frozenset((j,)))
        else:
            self._apply_index(clock, j)

    # -- drivers --

    def run_count(self, d: int) -> MatchingOutcome:
        n = self.inst.n
        d = min(d, n)  # a wider window changes nothing: all jobs arrive before the first deadline
        for t in range(1, n + d + 2):
            self.step = t
            if t <= n:
                self.available[t] = None
            j = t - d
            if j >= 1:
                self._critical(t, j)
        return self.out

    def run_time(self, W: float) -> MatchingOutcome:
        ts = self.inst.timestamps
        events = [(ts[i], ARRIVAL, i + 1) for i in range(self.inst.n)]
        events += [(ts[i] + W, CRITICAL, i + 1) for i in range(self.inst.n)]
        period = getattr(self.policy, "period", None) if isinstance(self.policy, BatchPolicy) \
            and self.policy.mode == "periodic" else None
        if period:
            origin, last = ts[0], ts[-1] + W
            count = int(math.floor((last - origin) / period)) + 1
            events += [(origin + i * period, EPOCH, i) for i in range(count)]
        events.sort()
        for step, (clock, kind, ident) in enumerate(events, start=1):
            self.step = step
            if kind == ARRIVAL:
                self.available[ident] = None
            elif kind == EPOCH:
                self._epoch(clock, clock + period, W)
            elif isinstance(self.policy, BatchPolicy) and period:
                # expired between epochs without being seen by one
                if ident in self.available:
                    snapshot = tuple(self.available) if self.record_trace else ()
                    self._solo(ident)
                    self._log(clock, "critical", ident, DispatchAlone(), snapshot)
            else:
                self._critical(clock, ident)
        return self.out

    def _epoch(self, clock: float, next_epoch: float, W: float) -> None:
        if not self.available:
            return
        ts = self.inst.timestamps
        expiring = frozenset(a for a in self.available if ts[a - 1] + W < next_epoch)
        if expiring:
            self._apply_batch(clock, "epoch", None, expiring)


def simulate(inst: Instance, policy: Policy, negative_match_allowed: Optional[bool] = None,
             tiebreak: str = "lowest", record_trace: bool = True) -> MatchingOutcome:
    """Run ``policy`` on ``inst`` and return every dispatch with its reward."""
    if negative_match_allowed is None:
        negative_match_allowed = default_negative_allowed(inst.topology)
    run = _Run(inst, policy, negative_match_allowed, tiebreak, record_trace)
    if isinstance(inst.criticality, CountWindow):
        return run.run_count(inst.criticality.d)
    return run.run_time(inst.criticality.W)
