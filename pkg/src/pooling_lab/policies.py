"""Index policies (GRE, PB, HD, AD) and batching policies (BAT, RBAT, PRBAT)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .instance import Instance, TimeWindow
from .offline.lp import hindsight_duals
from .offline.matching import EdgeSet, opt_matching
from .pricing import PriceTable
from .topology import Topology, potential_vector, reward, reward_row

DEFAULT_GAMMA_GRID = tuple(i / 10 for i in range(11))


# --- prices ------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroPrice:
    label = "zero"


@dataclass(frozen=True)
class PotentialPrice:
    label = "potential"


@dataclass(frozen=True)
class PerJobPrice:
    lam: tuple[float, ...]
    label = "hd"


@dataclass(frozen=True)
class PerCellPrice:
    table: PriceTable
    label = "ad"


Price = ZeroPrice | PotentialPrice | PerJobPrice | PerCellPrice


def price_vector(price: Price, inst: Instance) -> np.ndarray:
    if isinstance(price, ZeroPrice):
        return np.zeros(inst.n)
    if isinstance(price, PotentialPrice):
        return potential_vector(inst.topology, inst.types)
    if isinstance(price, PerJobPrice):
        if len(price.lam) != inst.n:
            raise ValueError(f"per-job prices cover {len(price.lam)} jobs, instance has {inst.n}")
        return np.asarray(price.lam, dtype=float)
    return np.array([price.table.lookup(t) for t in inst.types], dtype=float)


# --- index policies ----------------------------------------------------------


@dataclass(frozen=True)
class IndexPolicy:
    """Match a critical job j to the available k maximising r(j, k) - price(k)."""

    name: str
    price: Price
    topology: Optional[Topology] = None
    kind = "index"

    def prepare(self, inst: Instance) -> np.ndarray:
        return price_vector(self.price, inst)


def index_value(policy: IndexPolicy, inst: Instance, j: int, k: int) -> float:
    r = reward(inst.topology, inst.arrivals[j - 1].jtype, inst.arrivals[k - 1].jtype)
    return r - float(policy.prepare(inst)[k - 1])


def make_gre(top: Optional[Topology] = None) -> IndexPolicy:
    return IndexPolicy("gre", ZeroPrice(), top)


def make_pb(top: Optional[Topology] = None) -> IndexPolicy:
    return IndexPolicy("pb", PotentialPrice(), top)


def make_hd(inst: Instance) -> IndexPolicy:
    lam = hindsight_duals(inst)
    return IndexPolicy("hd", PerJobPrice(tuple(lam.tolist())), inst.topology)


def make_ad(table: PriceTable, top: Optional[Topology] = None) -> IndexPolicy:
    return IndexPolicy("ad", PerCellPrice(table), top)


# --- batching policies -------------------------------------------------------


@dataclass(frozen=True)
class BatchContext:
    """What a batching policy sees at a trigger.

    ``critical`` holds the jobs that must leave now: the critical job for
    full/rolling batching, every job expiring before the next epoch for
    periodic batching.
    """

    available: tuple[int, ...]
    critical: frozenset[int]
    packed: np.ndarray
    topology: Topology
    prices: Optional[np.ndarray]


@dataclass(frozen=True)
class BatchDispatch:
    pairs: tuple[tuple[int, int], ...]
    solos: tuple[int, ...]


@dataclass(frozen=True)
class BatchPolicy:
    mode: str  # "full" | "rolling" | "periodic"
    price: Optional[Price] = None
    gamma: float = 0.0
    period: Optional[float] = None
    topology: Optional[Topology] = None
    kind = "batch"

    def __post_init__(self):
        if self.mode not in ("full", "rolling", "periodic"):
            raise ValueError(f"unknown batching mode {self.mode!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.mode == "periodic" and not (self.period and self.period > 0):
            raise ValueError("periodic batching needs a positive period")

    @property
    def name(self) -> str:
        base = {"full": "bat", "rolling": "rbat", "periodic": "prbat"}[self.mode]
        if self.price is None:
            return base
        return f"{base}+{self.price.label}@{self.gamma:g}"

    def prepare(self, inst: Instance) -> Optional[np.ndarray]:
        if self.mode == "periodic" and not isinstance(inst.criticality, TimeWindow):
            raise ValueError("periodic batching needs a time-window instance")
        return None if self.price is None else price_vector(self.price, inst)

    def adjusted_weights(self, ctx: BatchContext) -> EdgeSet:
        """Rewards over the available jobs, less gamma * price on non-critical endpoints.

        Edge ids are positions (1-based) in ``ctx.available``.
        """
        ids = np.asarray(ctx.available) - 1
        size = len(ids)
        penalty = np.zeros(size)
        if ctx.prices is not None:
            noncrit = np.array([a not in ctx.critical for a in ctx.available])
            penalty = np.where(noncrit, self.gamma * ctx.prices[ids], 0.0)
        edges = []
        for a in range(size - 1):
            rs = reward_row(ctx.topology, ctx.packed, ids[a], ids[a + 1:])
            if ctx.prices is not None:
                rs = rs - penalty[a] - penalty[a + 1:]
            edges.extend((a + 1, b, w) for b, w in zip(range(a + 2, size + 1), rs.tolist()))
        return EdgeSet(size, tuple(edges))

    def decide(self, ctx: BatchContext) -> BatchDispatch:
        sol = opt_matching(self.adjusted_weights(ctx), fill_zero=False)
        pos_pairs = [(ctx.available[a - 1], ctx.available[b - 1]) for a, b in sol.pairs]
        if self.mode == "full":
            paired = {x for p in pos_pairs for x in p}
            return BatchDispatch(tuple(pos_pairs), tuple(a for a in ctx.available if a not in paired))
        pairs = [p for p in pos_pairs if p[0] in ctx.critical or p[1] in ctx.critical]
        paired = {x for p in pairs for x in p}
        solos = tuple(sorted(c for c in ctx.critical if c not in paired))
        return BatchDispatch(tuple(pairs), solos)


def make_batch(mode: str, price: Optional[Price] = None, gamma: float = 0.0,
               period: Optional[float] = None) -> BatchPolicy:
    return BatchPolicy(mode, price, gamma, period)


Policy = IndexPolicy | BatchPolicy


def tune_gamma(train: Sequence[Instance], family: Callable[[float], Policy],
               grid: Sequence[float] = DEFAULT_GAMMA_GRID,
               simulate_fn: Optional[Callable] = None) -> tuple[float, list[tuple[float, float]]]:
    """Pick the gamma with the highest mean total reward on ``train``.

    ``family`` maps a gamma to a policy. Ties keep the smallest gamma. Returns
    the winner and the (gamma, mean reward) table in grid order.
    """
    if not train:
        raise ValueError("training set is empty")
    if not grid or any(not 0.0 <= g <= 1.0 for g in grid):
        raise ValueError("gamma grid must be a nonempty subset of [0, 1]")
    if simulate_fn is None:
        from .engine import simulate as simulate_fn
    table = []
    best_gamma, best_score = None, -math.inf
    for g in sorted(grid):
        policy = family(g)
        score = math.fsum(simulate_fn(inst, policy, record_trace=False).total_reward
                          for inst in train) / len(train)
        table.append((g, score))
        if score > best_score:
            best_gamma, best_score = g, score
    return best_gamma, table


BATCH_MODES = {"bat": "full", "rbat": "rolling", "prbat": "periodic"}
POLICY_NAMES = ("pb", "gre", "hd", "ad", *BATCH_MODES)


def build_policy(desc: dict | str, inst: Instance, table: Optional[PriceTable] = None) -> Policy:
    """Build a policy for ``inst`` from a descriptor such as ``"pb"`` or
    ``{"name": "rbat", "price": "potential", "gamma": 0.3}``."""
    if isinstance(desc, str):
        desc = {"name": desc}
    name = desc["name"]
    if name == "pb":
        return make_pb(inst.topology)
    if name == "gre":
        return make_gre(inst.topology)
    if name == "hd":
        return make_hd(inst)
    if name == "ad":
        if table is None:
            raise ValueError("the ad policy needs a price table")
        return make_ad(table, inst.topology)
    if name not in BATCH_MODES:
        raise ValueError(f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}")
    price_name = desc.get("price")
    price: Optional[Price] = None
    if price_name == "potential":
        price = PotentialPrice()
    elif price_name == "hd":
        price = PerJobPrice(tuple(hindsight_duals(inst).tolist()))
    elif price_name == "ad":
        if table is None:
            raise ValueError("ad price adjustment needs a price table")
        price = PerCellPrice(table)
    elif price_name is not None:
        raise ValueError(f"unknown price source {price_name!r}")
    policy = BatchPolicy(BATCH_MODES[name], price, float(desc.get("gamma", 0.0)),
                         desc.get("period"), inst.topology)
    policy.prepare(inst)  # surfaces mode/instance mismatches before any work
    return policy


def policy_label(desc: dict | str) -> str:
    if isinstance(desc, str):
        return desc
    if "label" in desc:
        return desc["label"]
    label = desc["name"]
    if desc.get("price"):
        label += f"+{desc['price']}@{float(desc.get('gamma', 0.0)):g}"
    if desc.get("period"):
        label += f"/{desc['period']:g}s"
    return label
