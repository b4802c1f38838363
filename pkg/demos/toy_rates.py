"""Posterior concentration rates on the toy MDP.

Runs the uniform-random agent and epsilon-greedy Thompson sampling with
delta_t = t^(-1/4), then fits log-log slopes to the mean parameter error.
Uniform exploration should decay roughly like t^(-1/2); the greedy agent
explores less and its rate is slower but still clearly negative.
"""
import sys

from posterior_ts.experiments import aggregate, emit_outputs, make_config, run_experiment
from posterior_ts.metrics import loglog_slope

out_dir = sys.argv[1] if len(sys.argv) > 1 else "results/demo_toy"
groups = []
for agent in ("uniform", "ets"):
    cfg = make_config("toy", agent, horizon=1000, n_runs=8)
    records = run_experiment(cfg)
    groups.append((cfg, records))
    agg = aggregate(records)
    err = agg.mean_series["param_l2"]
    print(f"{agent:8s} slope {loglog_slope(err, 100):+.3f}  "
          f"error at t=100 {err.at(100):.4f}  t=1000 {err.at(1000):.4f}  "
          f"v_error t=1000 {agg.mean_series['v_error'].at(1000):.4f}")

paths = emit_outputs(groups, out_dir, stride=10)
print("wrote", ", ".join(str(p) for p in paths.values()))
