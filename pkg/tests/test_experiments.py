import csv
import json

import numpy as np
import pytest

from posterior_ts.errors import ConfigError
from posterior_ts.experiments import (
    SERIES_HEADER,
    SUMMARY_HEADER,
    RunRecord,
    aggregate,
    emit_csv,
    emit_outputs,
    make_config,
    reference_curves,
    run_experiment,
    run_glucose,
    run_riverswim,
    run_toy,
)
from posterior_ts.metrics import MetricSeries

SMALL_GLUCOSE = dict(n_patients=4, fqi_tuples=90, fqi_iters=2)


def fake_records(values, **cfg):
    config = make_config("toy", "uniform", horizon=2, n_runs=len(values), **cfg).snapshot()
    out = []
    for i, v in enumerate(values):
        s = MetricSeries("param_l2", np.array([1, 2]), np.array([v, v / 2]), i, "uniform", "toy")
        out.append(RunRecord(config, i, {"param_l2": s}, {"param_l2": v}))
    return out


class TestConfig:
    @pytest.mark.parametrize("scenario, agent, kw", [
        ("glucose", "tsde", {}),
        ("glucose", "tsmdp", {}),
        ("toy", "gold", {}),
        ("riverswim", "naive_fqi", {}),
        ("toy", "ets", {"horizon": 0}),
        ("toy", "ets", {"n_runs": 0}),
        ("toy", "ets", {"delta": "sometimes"}),
        ("toy", "ets", {"theta0": (0.2,)}),
        ("riverswim", "ets", {"start_state": 7}),
        ("riverswim", "ets", {"theta0": (1.2,)}),
        ("glucose", "ets", {"checkpoints": (31,)}),
        ("moon", "ets", {}),
    ])
    def test_invalid(self, scenario, agent, kw):
        with pytest.raises(ConfigError):
            make_config(scenario, agent, **kw)

    def test_paper_scale(self):
        cfg = make_config("glucose", "ets", paper_scale=True)
        assert (cfg.n_patients, cfg.horizon, cfg.checkpoints) == (70, 50, (30, 50))
        toy = make_config("toy", "ets", paper_scale=True)
        assert (toy.horizon, toy.n_runs, toy.theta0) == (5000, 100, (0.2, 0.4))

    def test_scenario_mismatch(self):
        with pytest.raises(ConfigError):
            run_toy(make_config("riverswim", "ets", horizon=5))


class TestRuns:
    def test_toy_single_step(self):
        (rec,) = run_toy(make_config("toy", "ets", horizon=1, n_runs=1))
        assert set(rec.series) == {"param_l2", "v_error", "regret", "opt_action"}
        assert all(len(s.values) == 1 for s in rec.series.values())

    def test_riverswim_runs_use_distinct_streams(self):
        a, b = run_riverswim(make_config("riverswim", "uniform", horizon=200, n_runs=2, grid_points=64))
        assert a.run_index == 0 and b.run_index == 1
        assert not np.array_equal(a.series["theta_abs_err"].values, b.series["theta_abs_err"].values)

    def test_regret_nonnegative(self):
        recs = run_toy(make_config("toy", "ets", horizon=200, n_runs=2, gamma=0.9, grid_points=32))
        assert all(np.all(r.series["regret"].values >= 0) for r in recs)

    def test_oracle_posterior_exploration_loss(self):
        # point-mass posterior: greedy steps are optimal, exploratory ones are half the time
        cfg = make_config("riverswim", "ets", horizon=3000, n_runs=3, delta="const:0.05",
                          oracle_posterior=True)
        agg = aggregate(run_riverswim(cfg))
        assert agg.lookup("opt_action").mean == pytest.approx(1 - 0.05 / 2, abs=0.01)
        assert agg.lookup("theta_abs_err").mean == 0.0

    def test_glucose_checkpoints_and_gold(self):
        cfg = make_config("glucose", "gold", horizon=6, n_runs=1, checkpoints=(3, 6), **SMALL_GLUCOSE)
        (rec,) = run_glucose(cfg)
        assert set(rec.scalars) == {"cum_reward@T=3", "cum_reward@T=6"}
        curve = rec.series["cum_reward"].values
        assert rec.scalars["cum_reward@T=3"] == curve[2]

    def test_naive_fqi_cold_start_matches_uniform(self):
        # below the history threshold both agents draw the same uniform actions
        kw = dict(horizon=3, n_runs=1, min_history=1000, **SMALL_GLUCOSE)
        (a,) = run_glucose(make_config("glucose", "naive_fqi", **kw))
        (b,) = run_glucose(make_config("glucose", "uniform", **kw))
        np.testing.assert_array_equal(a.series["cum_reward"].values, b.series["cum_reward"].values)


class TestAggregate:
    def test_single_run(self):
        row = aggregate(fake_records([0.7])).lookup("param_l2")
        assert (row.mean, row.stderr, row.n_runs) == (0.7, 0.0, 1)

    def test_two_point(self):
        row = aggregate(fake_records([0.9, 1.1])).lookup("param_l2")
        assert row.mean == pytest.approx(1.0)
        assert row.stderr == pytest.approx(0.1)

    def test_permutation_invariant(self):
        recs = fake_records([0.3, 0.9, 0.4, 1.7])
        a = aggregate(recs)
        b = aggregate(recs[::-1])
        assert a.rows == b.rows
        np.testing.assert_array_equal(a.mean_series["param_l2"].values, b.mean_series["param_l2"].values)

    def test_mean_series(self):
        agg = aggregate(fake_records([1.0, 3.0]))
        np.testing.assert_allclose(agg.mean_series["param_l2"].values, [2.0, 1.0])

    def test_heterogeneous(self):
        with pytest.raises(ConfigError):
            aggregate(fake_records([1.0]) + fake_records([2.0], seed=1))

    def test_empty(self):
        with pytest.raises(ConfigError):
            aggregate([])

    def test_serial_and_parallel_agree(self):
        cfg = make_config("toy", "ets", horizon=60, n_runs=3, grid_points=32)
        serial = aggregate(run_experiment(cfg))
        parallel = aggregate(run_experiment(make_config("toy", "ets", horizon=60, n_runs=3,
                                                        grid_points=32, workers=2)))
        assert [(r.metric, r.mean, r.stderr) for r in serial.rows] == \
               [(r.metric, r.mean, r.stderr) for r in parallel.rows]
        for name, s in serial.mean_series.items():
            np.testing.assert_array_equal(s.values, parallel.mean_series[name].values)


class TestOutput:
    def test_series_header(self, tmp_path):
        emit_csv(fake_records([0.5]), tmp_path / "s.csv")
        rows = list(csv.reader(open(tmp_path / "s.csv")))
        assert tuple(rows[0]) == SERIES_HEADER
        assert rows[1] == ["toy", "uniform", "0", "1", "param_l2", "0.5"]

    def test_empty_is_header_only(self, tmp_path):
        emit_csv([], tmp_path / "s.csv")
        assert open(tmp_path / "s.csv").read() == ",".join(SERIES_HEADER) + "\n"

    def test_summary_format(self, tmp_path):
        emit_csv(aggregate(fake_records([0.1, 0.2])), tmp_path / "t.csv")
        rows = list(csv.reader(open(tmp_path / "t.csv")))
        assert tuple(rows[0]) == SUMMARY_HEADER
        # 17 significant digits round-trip exactly
        assert float(rows[1][4]) == np.mean([0.1, 0.2])
        assert rows[1][4] == format(np.mean([0.1, 0.2]), ".17g")

    def test_unwritable_path_reports_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError, match="file"):
            emit_csv([], blocker / "sub" / "s.csv")

    def test_byte_identical_reruns(self, tmp_path):
        def once(out):
            cfg = make_config("toy", "ets", horizon=80, n_runs=2, grid_points=32)
            return emit_outputs([(cfg, run_experiment(cfg))], out)

        a, b = once(tmp_path / "a"), once(tmp_path / "b")
        for key in a:
            assert a[key].read_bytes() == b[key].read_bytes()

    def test_outputs_and_config_mirror(self, tmp_path):
        cfg = make_config("toy", "uniform", horizon=30, n_runs=1, grid_points=16)
        paths = emit_outputs([(cfg, run_experiment(cfg))], tmp_path, stride=10)
        assert json.loads(paths["config"].read_text())[0]["agent"] == "uniform"
        times = {int(r[3]) for r in list(csv.reader(open(paths["series"])))[1:]}
        assert times == {1, 11, 21, 30}
        ref = list(csv.reader(open(paths["reference"])))
        assert ref[0] == ["t", "t^-1/2", "t^-9/20", "t^-1/4"] and len(ref) == 31

    def test_reference_curves(self):
        c = reference_curves(4)
        np.testing.assert_allclose(c["t^-1/2"], [1, 2**-0.5, 3**-0.5, 0.5])
