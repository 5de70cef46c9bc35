"""Feasible pair sets and exact hindsight maximum-weight matchings."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np
import rustworkx as rx

from ..instance import CountWindow, Instance
from ..topology import Topology, pack_types, reward_row

BRUTE_FORCE_MAX_N = 16
# bits of integer precision given to the heaviest edge before handing weights to
# the blossom solver. It works on i128 integers; 100 bits leave room for its dual
# arithmetic and represent every weight above 2^-47 of the heaviest exactly.
_WEIGHT_BITS = 100


@dataclass(frozen=True)
class EdgeSet:
    n: int
    edges: tuple[tuple[int, int, float], ...]  # (j, k, weight), 1-based, j < k

    def weight_map(self) -> dict[tuple[int, int], float]:
        return {(j, k): w for j, k, w in self.edges}


@dataclass(frozen=True)
class MatchingSolution:
    pairs: tuple[tuple[int, int], ...]  # sorted, each (j, k) with j < k
    value: float

    def mate(self) -> dict[int, int]:
        out = {}
        for j, k in self.pairs:
            out[j] = k
            out[k] = j
        return out


def window_partners(inst: Instance) -> list[range | list[int]]:
    """For each job (0-based), the 0-based later jobs it may be paired with."""
    n = inst.n
    crit = inst.criticality
    if isinstance(crit, CountWindow):
        return [range(j + 1, min(n, j + crit.d + 1)) for j in range(n)]
    ts = inst.timestamps
    out = []
    for j in range(n):
        hi = bisect.bisect_right(ts, ts[j] + crit.W)
        out.append(range(j + 1, hi))
    return out


def feasible_edges(inst: Instance) -> EdgeSet:
    packed = pack_types(inst.topology, inst.types)
    edges = []
    for j, ks in enumerate(window_partners(inst)):
        if not len(ks):
            continue
        karr = np.arange(ks.start, ks.stop)
        ws = reward_row(inst.topology, packed, j, karr)
        edges.extend(zip([j + 1] * len(karr), (karr + 1).tolist(), ws.tolist()))
    return EdgeSet(inst.n, tuple(edges))


def _solution(pairs, weights: dict) -> MatchingSolution:
    pairs = tuple(sorted((min(a, b), max(a, b)) for a, b in pairs))
    return MatchingSolution(pairs, math.fsum(weights[p] for p in pairs))


def _fill_zero_edges(edges: EdgeSet, pairs: set) -> set:
    """Pair leftover vertices along zero-weight edges; the value is unchanged."""
    used = {v for p in pairs for v in p}
    for j, k, w in edges.edges:
        if w == 0 and j not in used and k not in used:
            pairs.add((j, k))
            used.update((j, k))
    return pairs


def _blossom_positive(n: int, positive: list) -> set:
    top = max(w for _, _, w in positive)
    shift = _WEIGHT_BITS - math.frexp(top)[1]
    g = rx.PyGraph()
    g.add_nodes_from(range(n + 1))
    g.add_edges_from([(j, k, round(math.ldexp(w, shift))) for j, k, w in positive])
    return {(min(a, b), max(a, b)) for a, b in rx.max_weight_matching(g, weight_fn=int)}


def _blossom(edges: EdgeSet, fill_zero: bool) -> MatchingSolution:
    weights = edges.weight_map()
    positive = [(j, k, w) for j, k, w in edges.edges if w > 0]
    pairs: set = set()
    while positive:
        pairs |= _blossom_positive(edges.n, positive)
        # edges far below the largest weight round to zero; match them in a further pass
        used = {v for p in pairs for v in p}
        positive = [(j, k, w) for j, k, w in positive if j not in used and k not in used]
    if fill_zero:
        pairs = _fill_zero_edges(edges, pairs)
    return _solution(pairs, weights)


def _exact_int(w: float) -> int:
    """w * 2^1074 as an exact integer, so sums compare without rounding."""
    num, den = w.as_integer_ratio()
    return num * ((1 << 1074) // den)


def _brute_force(edges: EdgeSet) -> MatchingSolution:
    n = edges.n
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force is limited to n <= {BRUTE_FORCE_MAX_N}, got n={n}")
    weights = edges.weight_map()
    adj = [[] for _ in range(n)]
    for j, k, w in edges.edges:
        adj[j - 1].append((k - 1, _exact_int(w)))
    memo: dict[int, tuple[int, tuple]] = {}

    # best(mask): optimum over the vertices whose bits are set in mask,
    # branching on the lowest such vertex: leave it single or pair it forward
    def best(mask: int) -> tuple[int, tuple]:
        if mask == 0:
            return 0, ()
        if mask in memo:
            return memo[mask]
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        value, pairs = best(rest)
        for k, w in adj[i]:
            if rest >> k & 1:
                sub_value, sub_pairs = best(rest & ~(1 << k))
                if sub_value + w > value:
                    value, pairs = sub_value + w, sub_pairs + ((i + 1, k + 1),)
        memo[mask] = (value, pairs)
        return value, pairs

    _, pairs = best((1 << n) - 1)
    return _solution(set(pairs), weights)


def opt_matching(edges: EdgeSet, mode: str = "blossom", fill_zero: bool = True) -> MatchingSolution:
    """Maximum-weight matching. With ``fill_zero`` leftover jobs are also paired
    along zero-weight edges, which changes the pair count but not the value."""
    if mode == "blossom":
        return _blossom(edges, fill_zero)
    if mode == "brute-force":
        return _brute_force(edges)
    raise ValueError(f"unknown matching mode {mode!r}")


def sorted_pairing(inst: Instance) -> MatchingSolution:
    """Offline optimum for the min-common-origin reward: sort destinations
    descending and pair neighbours (1st with 2nd, 3rd with 4th, ...)."""
    vals = inst.values
    order = sorted(range(inst.n), key=lambda i: (-vals[i], i))
    pairs = []
    for a, b in zip(order[0::2], order[1::2]):
        pairs.append((min(a, b) + 1, max(a, b) + 1))
    pairs.sort()
    return MatchingSolution(tuple(pairs), math.fsum(min(vals[a - 1], vals[b - 1]) for a, b in pairs))


def solve_opt(inst: Instance, mode: str = "auto") -> MatchingSolution:
    """Hindsight optimum of an instance.

    ``auto`` uses the sorted pairing for offline min-common-origin instances
    (where the complete graph would make blossom needlessly slow) and blossom
    otherwise.
    """
    if mode == "auto":
        if inst.topology is Topology.MIN_COMMON_ORIGIN and inst.is_offline():
            return sorted_pairing(inst)
        mode = "blossom"
    if mode == "sorted":
        if not (inst.topology is Topology.MIN_COMMON_ORIGIN and inst.is_offline()):
            raise ValueError("sorted pairing only applies to offline min-common-origin instances")
        return sorted_pairing(inst)
    return opt_matching(feasible_edges(inst), mode)
