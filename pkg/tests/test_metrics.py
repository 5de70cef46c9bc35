import math

import pytest
from hypothesis import given, strategies as st

from pooling_lab.engine import simulate
from pooling_lab.instance import dump_instance, from_trips, from_values, gen_uniform_1d
from pooling_lab.metrics import mean_std, opt_metrics, run_metrics, sweep
from pooling_lab.offline import solve_opt
from pooling_lab.policies import make_gre, make_pb
from pooling_lab.topology import Topology


def test_run_metrics_hand_values():
    inst = from_values([0.3, 0.9, 0.5], d=2)
    m = run_metrics(inst, simulate(inst, make_gre()), solve_opt(inst))
    assert m.total_reward == 0.3
    assert m.opt_value == 0.5
    assert m.regret == pytest.approx(0.2)
    assert m.ratio == pytest.approx(0.6)
    assert m.match_rate == pytest.approx(2 / 3)
    assert m.saving_fraction == pytest.approx(0.3 / 1.7)


def test_zero_optimum_ratio_is_one():
    inst = from_values([0.0, 0.0])
    m = run_metrics(inst, simulate(inst, make_pb()), solve_opt(inst))
    assert m.ratio == 1.0


def test_saving_fraction_absent_without_solo_distance():
    inst = from_values([0.2, 0.4], Topology.PROXIMITY)
    assert opt_metrics(inst, solve_opt(inst)).saving_fraction is None


def test_mean_std():
    assert mean_std([1.0, 2.0, 3.0]) == (2.0, 1.0)
    assert mean_std([4.0]) == (4.0, 0.0)


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=20), st.randoms())
def test_mean_std_order_independent(xs, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    assert mean_std(xs) == mean_std(ys)


@given(st.lists(st.floats(0, 1), min_size=2, max_size=40))
def test_optimal_saving_fraction_at_most_half(vals):
    inst = from_values(vals)
    m = opt_metrics(inst, solve_opt(inst))
    assert m.saving_fraction <= 0.5 + 1e-12


CFG = {"generator": "uniform1d", "n": 30, "densities": [2, 5], "seeds": 3,
       "policies": ["pb", "gre", {"name": "rbat", "price": "potential", "gamma": 0.2}, "ad", "opt"]}


class TestSweep:
    def test_cells_match_direct_runs(self):
        report = sweep(CFG)
        ratios = []
        for s in range(3):
            inst = gen_uniform_1d(30, s, d=5)
            ratios.append(run_metrics(inst, simulate(inst, make_pb()), solve_opt(inst)).ratio)
        cell = report.lookup("pb", 5, "ratio")
        assert cell.n_seeds == 3
        assert cell.mean == pytest.approx(math.fsum(ratios) / 3)
        assert report.lookup("opt", 2, "ratio").mean == 1.0

    def test_parallel_equals_serial(self):
        a, b = sweep(CFG), sweep(CFG, jobs=2)
        assert a.to_csv() == b.to_csv() and a.to_json() == b.to_json()

    def test_csv_layout(self):
        lines = sweep(dict(CFG, policies=["pb"], densities=[3])).to_csv().splitlines()
        assert lines[0] == "policy,density_or_window,metric,mean,std,n_seeds"
        assert {l.split(",")[2] for l in lines[1:]} == {"reward", "opt", "regret", "ratio", "match_rate",
                                                       "saving_fraction"}

    def test_failing_policy_recorded(self):
        report = sweep(dict(CFG, policies=["pb", {"name": "prbat", "period": 1.0}]))
        assert [f["policy"] for f in report.failures] == ["prbat/1s", "prbat/1s"]
        assert report.lookup("pb", 2, "ratio").n_seeds == 3

    def test_time_windows_from_files(self, tmp_path):
        paths = []
        for s in range(3):
            p = tmp_path / f"{s}.json"
            dump_instance(from_trips([((0, 0), (s + 1, 1)), ((0, 0), (1, s + 2)), ((0, 0), (2, 2))]), p)
            paths.append(str(p))
        cfg = {"generator": "instances", "instance_files": paths, "windows": [0.5, 2.0],
               "policies": ["gre", "ad"], "ad_grid_level": 1}
        report = sweep(cfg)
        assert report.failures == []
        assert report.lookup("gre", 0.5, "match_rate").mean == 0.0

    def test_config_errors(self):
        with pytest.raises(ValueError):
            sweep(dict(CFG, windows=[1.0]))
        with pytest.raises(ValueError):
            sweep(dict(CFG, policies=["pb", "pb"]))
        with pytest.raises(ValueError):
            sweep(dict(CFG, generator="nope"))
