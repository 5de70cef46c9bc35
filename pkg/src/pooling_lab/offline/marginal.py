"""Marginal loss and gain of a job: how much the hindsight optimum drops when the
job is removed, and how much it rises when a second copy is added."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..instance import Arrival, CountWindow, Instance, offline
from ..topology import Topology
from .matching import feasible_edges, opt_matching


@dataclass(frozen=True)
class MarginalReport:
    j: int
    ml: float
    mg: float


def _reindexed(inst: Instance, arrivals: list[Arrival]) -> Instance:
    arrivals = [Arrival(i, a.jtype, a.timestamp) for i, a in enumerate(arrivals, start=1)]
    crit = inst.criticality
    if inst.is_offline():
        crit = offline(len(arrivals))
    return Instance(tuple(arrivals), crit, inst.topology, inst.seed)


def without_job(inst: Instance, j: int) -> Instance | None:
    rest = [a for a in inst.arrivals if a.id != j]
    return _reindexed(inst, rest) if rest else None


def with_copy(inst: Instance, j: int) -> Instance:
    arr = list(inst.arrivals)
    arr.insert(j, arr[j - 1])
    return _reindexed(inst, arr)


def _exact_opt(inst: Instance | None, mode: str) -> Fraction:
    if inst is None:
        return Fraction(0)
    edges = feasible_edges(inst)
    weights = edges.weight_map()
    sol = opt_matching(edges, mode)
    return sum((Fraction(weights[p]) for p in sol.pairs), Fraction(0))


def _sorted_position(inst: Instance, j: int) -> tuple[list[Fraction], int]:
    vals = inst.values
    order = sorted(range(inst.n), key=lambda i: (-vals[i], i))
    desc = [Fraction(float(vals[i])) for i in order] + [Fraction(0)]
    return desc, order.index(j - 1) + 1


def _closed_form(inst: Instance, j: int, parity: int) -> float:
    desc, p = _sorted_position(inst, j)
    # 1-based positions k >= p with k % 2 == parity; desc[k-1] is the k-th largest
    total = sum((desc[k - 1] - desc[k] for k in range(p, inst.n + 1) if k % 2 == parity), Fraction(0))
    return float(total)


def _fast_path_applies(inst: Instance) -> bool:
    return inst.topology is Topology.MIN_COMMON_ORIGIN and inst.is_offline()


METHODS = ("auto", "closed-form", "generic")


def _check_job(inst: Instance, j: int, method: str) -> None:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    if not 1 <= j <= inst.n:
        raise ValueError(f"job {j} is not in 1..{inst.n}")


def marginal_loss(inst: Instance, j: int, method: str = "auto", mode: str = "blossom") -> float:
    _check_job(inst, j, method)
    if method == "closed-form" or (method == "auto" and _fast_path_applies(inst)):
        if not _fast_path_applies(inst):
            raise ValueError("the sorted closed form needs an offline min-common-origin instance")
        return _closed_form(inst, j, 0)
    return float(_exact_opt(inst, mode) - _exact_opt(without_job(inst, j), mode))


def marginal_gain(inst: Instance, j: int, method: str = "auto", mode: str = "blossom") -> float:
    _check_job(inst, j, method)
    if method == "closed-form" or (method == "auto" and _fast_path_applies(inst)):
        if not _fast_path_applies(inst):
            raise ValueError("the sorted closed form needs an offline min-common-origin instance")
        return _closed_form(inst, j, 1)
    return float(_exact_opt(with_copy(inst, j), mode) - _exact_opt(inst, mode))


def marginal_report(inst: Instance, j: int, method: str = "auto") -> MarginalReport:
    return MarginalReport(j, marginal_loss(inst, j, method), marginal_gain(inst, j, method))


def first_job_marginals(theta1: float, others: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised closed form of (ML_1, MG_1) for many samples at once.

    ``others`` has one row per sample holding the remaining n-1 destinations.
    Job 1 is placed ahead of any equal values, matching the scalar tie rule.
    """
    samples, rest = others.shape
    n = rest + 1
    desc = -np.sort(-others, axis=1)
    pos = 1 + (desc > theta1).sum(axis=1)  # 1-based slot of job 1
    zero = np.zeros((samples, 1))
    k = np.arange(1, n + 1)
    # slot k holds the k-th largest other value before job 1, the (k-1)-th after it
    full = np.where(k < pos[:, None], np.hstack([desc, zero]), np.hstack([zero, desc]))
    full[np.arange(samples), pos - 1] = theta1
    full = np.hstack([full, zero])
    gaps = full[:, :n] - full[:, 1:]
    tail = k[None, :] >= pos[:, None]
    even = (k % 2 == 0)[None, :]
    ml = (gaps * (tail & even)).sum(axis=1)
    mg = (gaps * (tail & ~even)).sum(axis=1)
    return ml, mg
