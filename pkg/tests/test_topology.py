import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pooling_lab.topology import (OneD, Point2, Topology, TwoD, pack_types, potential, reward,
                                  reward_row, solo_distance)

from support import ONE_D, one_d, two_d


def route_oracle(a: TwoD, b: TwoD) -> float:
    """Saving of the best two-pickup-then-two-dropoff route, by enumeration."""
    best = math.inf
    for first, second in ((a, b), (b, a)):
        for drops in ((a.dest, b.dest), (b.dest, a.dest)):
            stops = [first.origin, second.origin, *drops]
            best = min(best, sum(math.dist(p, q) for p, q in zip(stops, stops[1:])))
    return math.dist(a.origin, a.dest) + math.dist(b.origin, b.dest) - best


def test_one_d_rewards():
    a, b = OneD(0.3), OneD(0.8)
    assert reward(Topology.MIN_COMMON_ORIGIN, a, b) == 0.3
    assert reward(Topology.PROXIMITY, a, b) == pytest.approx(0.5)
    assert reward(Topology.SEPARATION, a, b) == pytest.approx(0.5)


def test_potentials():
    assert potential(Topology.MIN_COMMON_ORIGIN, OneD(0.6)) == 0.3
    assert potential(Topology.PROXIMITY, OneD(0.9)) == 0.5
    assert potential(Topology.SEPARATION, OneD(0.2)) == 0.4
    t = TwoD(Point2(0, 0), Point2(3, 4))
    assert potential(Topology.POOL_2D, t) == 2.5


def test_pool2d_shared_corridor():
    a = TwoD(Point2(0, 0), Point2(0, 1))
    b = TwoD(Point2(0, 0), Point2(0, 2))
    # one trip of length 2 replaces trips of 1 and 2
    assert reward(Topology.POOL_2D, a, b) == pytest.approx(1.0)


def test_solo_distance_undefined_for_unit_rewards():
    assert solo_distance(Topology.PROXIMITY, OneD(0.5)) is None
    assert solo_distance(Topology.MIN_COMMON_ORIGIN, OneD(0.5)) == 0.5


def test_type_validation():
    with pytest.raises(ValueError):
        OneD(1.5)
    with pytest.raises(ValueError):
        TwoD(Point2(0, math.nan), Point2(0, 0))
    with pytest.raises(ValueError):
        reward(Topology.POOL_2D, OneD(0.1), OneD(0.2))


@given(two_d, two_d)
def test_pool2d_matches_route_enumeration(a, b):
    assert reward(Topology.POOL_2D, a, b) == pytest.approx(route_oracle(a, b), abs=1e-9)


@given(st.sampled_from(ONE_D), one_d, one_d)
def test_one_d_symmetric_and_dominated_by_potentials(top, a, b):
    r = reward(top, a, b)
    assert r == reward(top, b, a)
    assert r <= potential(top, a) + potential(top, b) + 1e-12


@given(two_d, two_d)
def test_pool2d_saving_bounded_by_shorter_trip(a, b):
    r = reward(Topology.POOL_2D, a, b)
    assert r == pytest.approx(reward(Topology.POOL_2D, b, a), abs=1e-9)
    assert r <= min(solo_distance(Topology.POOL_2D, a), solo_distance(Topology.POOL_2D, b)) + 1e-9
    assert r <= potential(Topology.POOL_2D, a) + potential(Topology.POOL_2D, b) + 1e-9


@given(st.lists(two_d, min_size=2, max_size=8))
def test_vector_kernel_bit_identical_2d(types):
    packed = pack_types(Topology.POOL_2D, types)
    for j, k in itertools.product(range(len(types)), repeat=2):
        row = reward_row(Topology.POOL_2D, packed, j, np.array([k]))
        assert row[0] == reward(Topology.POOL_2D, types[j], types[k])


@given(st.sampled_from(ONE_D), st.lists(one_d, min_size=2, max_size=8))
def test_vector_kernel_bit_identical_1d(top, types):
    packed = pack_types(top, types)
    ks = np.arange(len(types))
    for j in range(len(types)):
        row = reward_row(top, packed, j, ks)
        assert row.tolist() == [reward(top, types[j], t) for t in types]
