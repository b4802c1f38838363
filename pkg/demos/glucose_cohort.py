"""Insulin dosing on the glucose AR(2) cohort.

Compares FQI under the true coefficients, epsilon-greedy Thompson sampling
with a Bayesian linear regression posterior, model-free FQI on the observed
history, and uniformly random dosing. Small settings keep this quick.
"""
from posterior_ts.experiments import aggregate, make_config, run_experiment

for agent in ("gold", "ets", "naive_fqi", "uniform"):
    cfg = make_config("glucose", agent, horizon=15, n_runs=2, n_patients=10, fqi_tuples=1000)
    row = aggregate(run_experiment(cfg)).lookup("cum_reward")
    print(f"{agent:10s} mean cumulative reward per patient {row.mean:8.2f} (s.e. {row.stderr:.2f})")
