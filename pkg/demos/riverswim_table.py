"""Optimal-action proportions on RiverSwim.

A reduced version of the four-cell comparison: each agent starts from the
left bank (state 1) or the middle (state 3) with a weak or strong current.
"""
import itertools

from posterior_ts.experiments import aggregate, make_config, run_experiment

agents = [("ets", "inv_t"), ("ets", "const:0.05"), ("dspsrl", None), ("tsmdp", None), ("tsde", None)]
cells = list(itertools.product((1, 3), (0.5, 0.9)))

print("agent            " + "  ".join(f"s0={s},th={t}" for s, t in cells))
for agent, delta in agents:
    row = []
    for s0, th in cells:
        cfg = make_config("riverswim", agent, horizon=3000, n_runs=3, start_state=s0,
                          theta0=(th,), delta=delta, grid_points=256)
        row.append(aggregate(run_experiment(cfg)).lookup("opt_action").mean)
    label = agent + (f"({delta})" if delta else "")
    print(f"{label:16s} " + "  ".join(f"{p:11.4f}" for p in row))
