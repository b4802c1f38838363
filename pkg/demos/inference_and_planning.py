"""Walk through the building blocks on the two-state toy MDP.

1. Build the true model and solve it exactly.
2. Watch a grid posterior over the two transition parameters sharpen as
   Bernoulli counts accumulate.
3. Plan for a posterior draw and measure how much value that plan loses
   under the true dynamics.
"""
import numpy as np

from posterior_ts.environments import ToyEnvironment, ToyParams, toy_model
from posterior_ts.inference import GridPosterior, SufficientCounts, grid_sample, grid_update
from posterior_ts.mdp import step_finite
from posterior_ts.metrics import d_mu, regret_quantities
from posterior_ts.planning import value_iteration
from posterior_ts.rng import RngStream

theta0 = np.array([0.2, 0.4])
model = toy_model(ToyParams(*theta0), gamma=0.25)
plan = value_iteration(model)
print("optimal actions per state:", plan.pi_star.table, " V:", plan.V.round(4))

# %% Posterior concentration under random actions
prior = GridPosterior.uniform(128, n_dims=2)
counts = SufficientCounts.zeros(2)
env_rng, act_rng = RngStream(0, 1), RngStream(0, 2)
s = 0
for t in range(1, 2001):
    a = int(act_rng.integers(2))
    s_next, _ = step_finite(model, s, a, env_rng)
    counts.add(*ToyEnvironment.observation(s, a, s_next))
    s = s_next
    if t in (10, 100, 1000, 2000):
        post = grid_update(prior, counts)
        sd = [np.sqrt(post.marginal(d) @ (g - m) ** 2) for d, (g, m) in enumerate(zip(post.grids, post.mean()))]
        print(f"t={t:5d}  posterior mean {post.mean().round(3)}  sd {np.round(sd, 3)}")

# %% Planning for a posterior draw
draw_rng = RngStream(0, 3)
for _ in range(3):
    theta = grid_sample(post, draw_rng)
    v_err, regret = regret_quantities(theta, theta0, "toy", 0.25)
    print(f"draw {theta.round(3)}  d_mu {d_mu(theta, theta0, 'toy'):.4f}  "
          f"value error {v_err:.4f}  regret {regret:.4f}")
