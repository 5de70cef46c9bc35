"""Hypothesis strategies and reference oracles shared by the test modules."""
import math
from fractions import Fraction

from hypothesis import strategies as st

from pooling_lab.instance import Arrival, CountWindow, Instance
from pooling_lab.topology import OneD, Point2, Topology, TwoD

ONE_D = [Topology.MIN_COMMON_ORIGIN, Topology.PROXIMITY, Topology.SEPARATION]
unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
coord = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)
one_d = st.builds(OneD, unit)
two_d = st.builds(TwoD, st.builds(Point2, coord, coord), st.builds(Point2, coord, coord))


@st.composite
def instances(draw, min_n=1, max_n=10, topologies=None):
    top = draw(st.sampled_from(topologies or ONE_D + [Topology.POOL_2D]))
    n = draw(st.integers(min_n, max_n))
    kind = two_d if top is Topology.POOL_2D else one_d
    types = draw(st.lists(kind, min_size=n, max_size=n))
    d = draw(st.integers(1, max(n, 1)))
    return Instance(tuple(Arrival(i, t) for i, t in enumerate(types, start=1)), CountWindow(d), top)


# multiples of 1/64 keep every reward and index exact in floating point
dyadic = st.integers(0, 64).map(lambda i: i / 64)


def reference_index_run(values, d, top, use_potential):
    """Straight-line count-window loop in exact arithmetic; ties go to the lowest id."""
    vals = [Fraction(v) for v in values]
    n = len(vals)

    def r(a, b):
        x, y = vals[a - 1], vals[b - 1]
        if top is Topology.MIN_COMMON_ORIGIN:
            return min(x, y)
        if top is Topology.PROXIMITY:
            return 1 - abs(x - y)
        return abs(x - y)

    def price(k):
        if not use_potential:
            return Fraction(0)
        x = vals[k - 1]
        return {Topology.MIN_COMMON_ORIGIN: x / 2, Topology.PROXIMITY: Fraction(1, 2),
                Topology.SEPARATION: max(x, 1 - x) / 2}[top]

    available, pairs = [], []
    d = min(d, n)
    for t in range(1, n + d + 2):
        if t <= n:
            available.append(t)
        j = t - d
        if j < 1 or j not in available:
            continue
        available.remove(j)
        if available:
            best = max(available, key=lambda k: (r(j, k) - price(k), -k))
            available.remove(best)
            pairs.append((min(j, best), max(j, best)))
    return set(pairs)


def even_position_sum(values) -> float:
    """Offline min-common-origin optimum: pair neighbours in sorted order."""
    desc = sorted(values, reverse=True)
    return math.fsum(desc[1::2])
