"""Scenario orchestration, Monte-Carlo aggregation and file output."""
from __future__ import annotations

import csv
import dataclasses
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import agents as ag
from .environments import (
    GlucoseParams,
    RIVERSWIM_STATES,
    finite_environment,
    glucose_initial_states,
    glucose_step_batch,
    riverswim_state,
)
from .errors import ConfigError, DomainError
from .fqi import RegressorConfig
from .inference import GridPosterior, grid_sample
from .mdp import Trajectory, step_finite
from .metrics import (
    MetricSeries,
    mean_and_stderr,
    optimal_action_proportion,
    param_l2_error,
    regret_quantities,
)
from .rng import RngStream

FINITE_AGENTS = ("ets", "dspsrl", "tsmdp", "tsde", "uniform")
GLUCOSE_AGENTS = ("ets", "dspsrl", "uniform", "gold", "naive_fqi")
SERIES_HEADER = ("scenario", "agent", "run_id", "t", "metric", "value")
SUMMARY_HEADER = ("scenario", "agent", "variant", "metric", "mean", "stderr", "n_runs")

_DEFAULTS = {
    "toy": dict(horizon=2000, n_runs=20, theta0=(0.2, 0.4), start_state=0, gamma=0.25,
                grid_points=256, delta="pow:-0.25"),
    "riverswim": dict(horizon=10_000, n_runs=10, theta0=(0.9,), start_state=1, gamma=0.99,
                      grid_points=1024, delta="inv_t"),
    "glucose": dict(horizon=30, n_runs=10, n_patients=20, delta="const:0.05"),
}
_PAPER_SCALE = {
    "toy": dict(horizon=5000, n_runs=100),
    "riverswim": dict(horizon=10_000, n_runs=100),
    "glucose": dict(horizon=50, n_runs=50, n_patients=70, checkpoints=(30, 50)),
}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    agent: str
    horizon: int = 1000
    n_runs: int = 1
    seed: int = 0
    delta: str = "inv_t"
    theta0: tuple = ()
    start_state: int = 0
    gamma: float = 0.99
    grid_points: int = 1024
    oracle_posterior: bool = False
    n_patients: int = 20
    fqi_iters: int = 5
    fqi_tuples: int = 2000
    fqi_gamma: float = 0.9
    fqi_episode_length: int = 30
    fqi_regressor: str = "trees"
    min_history: int = 50
    checkpoints: tuple = ()
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.scenario not in _DEFAULTS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        allowed = GLUCOSE_AGENTS if self.scenario == "glucose" else FINITE_AGENTS
        if self.agent not in allowed:
            raise ConfigError(f"agent {self.agent!r} not available for {self.scenario}")
        try:
            self.schedule
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
        if self.scenario == "toy":
            if len(self.theta0) != 2 or self.start_state not in (0, 1):
                raise ConfigError("toy needs two theta0 values and start state 0 or 1")
        if self.scenario == "riverswim":
            if len(self.theta0) != 1 or not 1 <= self.start_state <= RIVERSWIM_STATES:
                raise ConfigError("riverswim needs one theta0 value and a start state in 1..6")
        if self.scenario in ("toy", "riverswim"):
            try:
                finite_environment(self.scenario).params(self.theta0)
            except DomainError as exc:
                raise ConfigError(str(exc)) from None
            if not 0 < self.gamma < 1:
                raise ConfigError("gamma must lie in (0, 1)")
            if self.grid_points < 2:
                raise ConfigError("grid_points must be >= 2")
        else:
            if self.n_patients < 1 or self.fqi_iters < 1 or self.fqi_tuples < 1:
                raise ConfigError("n_patients, fqi_iters and fqi_tuples must be >= 1")
            if not 0 <= self.fqi_gamma < 1:
                raise ConfigError("fqi_gamma must lie in [0, 1)")
            if self.fqi_regressor not in ("trees", "knn"):
                raise ConfigError(f"unknown regressor {self.fqi_regressor!r}")
            if any(not 1 <= c <= self.horizon for c in self.checkpoints):
                raise ConfigError("checkpoints must lie in 1..horizon")
        return self

    @property
    def schedule(self) -> ag.DeltaSchedule:
        return ag.DeltaSchedule.parse(self.delta)

    @property
    def variant(self) -> str:
        parts = []
        if self.scenario == "riverswim":
            parts.append(f"s0={self.start_state};theta0={self.theta0[0]:g}")
        if self.agent == "ets":
            parts.append(f"delta={self.delta}")
        if self.oracle_posterior:
            parts.append("oracle")
        return ";".join(parts) or "-"

    def snapshot(self) -> dict:
        return dataclasses.asdict(self)


def make_config(scenario: str, agent: str, paper_scale: bool = False, **overrides) -> ExperimentConfig:
    """Config with scenario defaults (desk scale unless ``paper_scale``)."""
    if scenario not in _DEFAULTS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    kw = dict(_DEFAULTS[scenario])
    if paper_scale:
        kw.update(_PAPER_SCALE[scenario])
    kw.update({k: v for k, v in overrides.items() if v is not None})
    if "theta0" in kw:
        kw["theta0"] = tuple(float(x) for x in np.ravel(kw["theta0"]))
    kw["checkpoints"] = tuple(int(c) for c in kw.get("checkpoints", ()))
    return ExperimentConfig(scenario=scenario, agent=agent, **kw).validate()


@dataclass
class RunRecord:
    config: dict
    run_index: int
    series: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    duration: float = 0.0


# --------------------------------------------------------------------------
# Single runs
# --------------------------------------------------------------------------


def _finite_agent(cfg: ExperimentConfig, rng: RngStream, s0: int) -> ag.FiniteAgent:
    kw = dict(grid_points=cfg.grid_points)
    if cfg.oracle_posterior:
        grids = tuple(np.array([v]) for v in cfg.theta0)
        kw["posterior"] = GridPosterior(grids, np.zeros((1,) * len(grids)), np.zeros((1,) * len(grids)))
    args = (cfg.scenario, cfg.gamma, rng)
    if cfg.agent == "ets":
        return ag.EpsilonGreedyTS(*args, schedule=cfg.schedule, **kw)
    if cfg.agent == "dspsrl":
        return ag.DSPSRLAgent(*args, **kw)
    if cfg.agent == "tsmdp":
        return ag.TSMDPAgent(*args, reference_state=s0, **kw)
    if cfg.agent == "tsde":
        return ag.TSDEAgent(*args, **kw)
    return ag.UniformAgent(*args, **kw)


def _run_finite(cfg: ExperimentConfig, run_index: int) -> RunRecord:
    kind = cfg.scenario
    env = finite_environment(kind)
    theta0 = np.array(cfg.theta0)
    model0 = env.model(theta0, cfg.gamma)
    pi0 = ag.plan_for(kind, theta0, cfg.gamma).pi_star
    best = pi0.greedy_actions()
    s0 = riverswim_state(cfg.start_state) if kind == "riverswim" else cfg.start_state

    env_rng = RngStream.for_run(cfg.seed, run_index, "env")
    metric_rng = RngStream.for_run(cfg.seed, run_index, "metrics")
    agent = _finite_agent(cfg, RngStream.for_run(cfg.seed, run_index, "agent"), s0)

    T = cfg.horizon
    names = ("param_l2", "v_error", "regret", "opt_action") if kind == "toy" else (
        "theta_abs_err", "opt_action")
    out = {n: np.empty(T) for n in names}
    traj = Trajectory.start(s0)
    s = s0
    for t in range(T):
        a = agent.act(s, t)
        theta = agent.theta if agent.resampled else grid_sample(agent.posterior, metric_rng)
        if kind == "toy":
            out["param_l2"][t] = param_l2_error(theta, theta0)
            out["v_error"][t], out["regret"][t] = regret_quantities(
                theta, theta0, kind, cfg.gamma, s0)
        else:
            out["theta_abs_err"][t] = abs(theta[0] - theta0[0])
        out["opt_action"][t] = a == best[s]
        s_next, r = step_finite(model0, s, a, env_rng)
        agent.observe(s, a, r, s_next)
        traj.record(a, r, s_next)
        s = s_next

    times = np.arange(1, T + 1)
    series = {n: MetricSeries(n, times, v, run_index, cfg.agent, kind) for n, v in out.items()}
    scalars = {n: float(v[-1]) for n, v in out.items() if n != "opt_action"}
    scalars["opt_action"] = optimal_action_proportion(traj, pi0)
    scalars["n_resamples"] = float(agent.n_resamples)
    return RunRecord(cfg.snapshot(), run_index, series, scalars)


def _glucose_agent(cfg: ExperimentConfig, params: GlucoseParams, rng: RngStream):
    fqi = ag.FqiSettings(cfg.fqi_iters, cfg.fqi_gamma, cfg.fqi_tuples, cfg.fqi_episode_length,
                         RegressorConfig(kind=cfg.fqi_regressor))
    if cfg.agent == "ets":
        return ag.GlucoseETS(params, rng, cfg.schedule, fqi)
    if cfg.agent == "dspsrl":
        return ag.GlucoseDSPSRL(params, rng, fqi)
    if cfg.agent == "gold":
        return ag.GlucoseGold(params, rng, fqi)
    if cfg.agent == "naive_fqi":
        return ag.GlucoseNaiveFQI(params, rng, fqi, cfg.min_history)
    return ag.GlucoseUniform(params, rng, fqi)


def _run_glucose(cfg: ExperimentConfig, run_index: int) -> RunRecord:
    params = GlucoseParams()
    env_rng = RngStream.for_run(cfg.seed, run_index, "env")
    agent = _glucose_agent(cfg, params, RngStream.for_run(cfg.seed, run_index, "agent"))
    states = glucose_initial_states(params, cfg.n_patients, env_rng.child("init"))
    cum = np.zeros(cfg.n_patients)
    curve = np.empty(cfg.horizon)
    for t in range(cfg.horizon):
        actions = agent.act(states, t)
        nxt, rewards = glucose_step_batch(params, states, actions, env_rng)
        agent.observe(states, actions, rewards, nxt)
        cum += rewards
        curve[t] = cum.mean()
        states = nxt
    times = np.arange(1, cfg.horizon + 1)
    series = {"cum_reward": MetricSeries("cum_reward", times, curve, run_index, cfg.agent, "glucose")}
    checkpoints = cfg.checkpoints or (cfg.horizon,)
    scalars = {f"cum_reward@T={c}": float(curve[c - 1]) for c in checkpoints}
    return RunRecord(cfg.snapshot(), run_index, series, scalars)


def run_single(cfg: ExperimentConfig, run_index: int) -> RunRecord:
    start = time.perf_counter()
    rec = _run_glucose(cfg, run_index) if cfg.scenario == "glucose" else _run_finite(cfg, run_index)
    rec.duration = time.perf_counter() - start
    return rec


def run_experiment(cfg: ExperimentConfig) -> list[RunRecord]:
    """All Monte-Carlo runs of one config, ordered by run index."""
    cfg.validate()
    indices = range(cfg.n_runs)
    if cfg.workers == 1 or cfg.n_runs == 1:
        return [run_single(cfg, i) for i in indices]
    with ProcessPoolExecutor(max_workers=min(cfg.workers, cfg.n_runs)) as pool:
        return list(pool.map(run_single, [cfg] * cfg.n_runs, indices))


def _check_scenario(cfg: ExperimentConfig, scenario: str) -> list[RunRecord]:
    if cfg.scenario != scenario:
        raise ConfigError(f"expected a {scenario} config, got {cfg.scenario}")
    return run_experiment(cfg)


def run_toy(cfg: ExperimentConfig) -> list[RunRecord]:
    return _check_scenario(cfg, "toy")


def run_riverswim(cfg: ExperimentConfig) -> list[RunRecord]:
    return _check_scenario(cfg, "riverswim")


def run_glucose(cfg: ExperimentConfig) -> list[RunRecord]:
    return _check_scenario(cfg, "glucose")


# --------------------------------------------------------------------------
# Aggregation
# --------------------------------------------------------------------------


@dataclass
class AggregateRow:
    scenario: str
    agent: str
    variant: str
    metric: str
    mean: float
    stderr: float
    n_runs: int


@dataclass
class Aggregate:
    rows: list
    mean_series: dict

    def lookup(self, metric: str, agent: str | None = None, variant: str | None = None) -> AggregateRow:
        for row in self.rows:
            if row.metric == metric and agent in (None, row.agent) and variant in (None, row.variant):
                return row
        raise KeyError((metric, agent, variant))


def aggregate(records: list[RunRecord]) -> Aggregate:
    """Per-step means across runs plus mean/stderr of per-run scalars."""
    if not records:
        raise ConfigError("nothing to aggregate")
    snap = records[0].config
    if any(r.config != snap for r in records[1:]):
        raise ConfigError("cannot aggregate runs with different configs")
    cfg = ExperimentConfig(**{**snap, "theta0": tuple(snap["theta0"]),
                              "checkpoints": tuple(snap["checkpoints"])})
    records = sorted(records, key=lambda r: r.run_index)
    rows = []
    for name in records[0].scalars:
        if name == "n_resamples":
            continue
        mean, se, n = mean_and_stderr([r.scalars[name] for r in records])
        metric, _, at = name.partition("@")
        variant = ";".join(p for p in (cfg.variant if cfg.variant != "-" else "", at) if p) or "-"
        rows.append(AggregateRow(cfg.scenario, cfg.agent, variant, metric, mean, se, n))
    means = {}
    for name, first in records[0].series.items():
        stacked = np.vstack([r.series[name].values for r in records])
        means[name] = MetricSeries(name, first.times, stacked.mean(axis=0), "mean", cfg.agent, cfg.scenario)
    return Aggregate(rows, means)


# --------------------------------------------------------------------------
# Output
# --------------------------------------------------------------------------


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _open(path) -> object:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def write_series_csv(series: list[MetricSeries], path, stride: int = 1) -> None:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for s in series:
            keep = (s.times - 1) % stride == 0
            keep[-1] = True
            for t, v in zip(s.times[keep], s.values[keep]):
                w.writerow((s.scenario, s.agent, s.run_id, int(t), s.name, fmt(v)))


def write_summary_csv(rows: list[AggregateRow], path) -> None:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in rows:
            w.writerow((r.scenario, r.agent, r.variant, r.metric, fmt(r.mean), fmt(r.stderr), r.n_runs))


def emit_csv(obj, path, stride: int = 1) -> None:
    """Write run records (series file) or aggregate rows (summary file)."""
    if isinstance(obj, Aggregate):
        return write_summary_csv(obj.rows, path)
    items = list(obj)
    if items and isinstance(items[0], AggregateRow):
        return write_summary_csv(items, path)
    series = [s for rec in items for s in rec.series.values()]
    return write_series_csv(series, path, stride)


def reference_curves(horizon: int) -> dict:
    t = np.arange(1, horizon + 1, dtype=float)
    return {"t^-1/2": t**-0.5, "t^-9/20": t**-0.45, "t^-1/4": t**-0.25}


def emit_outputs(groups: list[tuple[ExperimentConfig, list[RunRecord]]], out_dir, stride: int = 1) -> dict:
    """Write series, mean series, summary and config files for a batch of configs."""
    out = Path(out_dir)
    records = [r for _, recs in groups for r in recs]
    aggs = [aggregate(recs) for _, recs in groups if recs]
    paths = {
        "series": out / "series.csv",
        "series_mean": out / "series_mean.csv",
        "summary": out / "summary.csv",
        "config": out / "config.json",
    }
    emit_csv(records, paths["series"], stride)
    write_series_csv([s for a in aggs for s in a.mean_series.values()], paths["series_mean"], stride)
    write_summary_csv([row for a in aggs for row in a.rows], paths["summary"])
    with _open(paths["config"]) as fh:
        json.dump([cfg.snapshot() for cfg, _ in groups], fh, indent=2, sort_keys=True)
        fh.write("\n")
    if groups and groups[0][0].scenario == "toy":
        horizon = max(cfg.horizon for cfg, _ in groups)
        paths["reference"] = out / "reference_curves.csv"
        with _open(paths["reference"]) as fh:
            w = csv.writer(fh, lineterminator="\n")
            curves = reference_curves(horizon)
            w.writerow(("t", *curves))
            for i in range(horizon):
                w.writerow((i + 1, *(fmt(c[i]) for c in curves.values())))
    return paths
