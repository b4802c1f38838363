"""Quantities reported by the experiments."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .agents import plan_for
from .environments import finite_environment
from .errors import DomainError
from .mdp import Policy, Trajectory
from .planning import policy_evaluation

SERIES_METRICS = ("param_l2", "v_error", "regret", "opt_action", "cum_reward", "theta_abs_err")


@dataclass
class MetricSeries:
    name: str
    times: np.ndarray
    values: np.ndarray
    run_id: object = 0
    agent: str = ""
    scenario: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise DomainError("times and values must have equal length")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise DomainError("times must be strictly increasing")

    def at(self, t: int) -> float:
        idx = np.searchsorted(self.times, t)
        if idx >= self.times.size or self.times[idx] != t:
            raise KeyError(t)
        return float(self.values[idx])


def hellinger_sq(p, q) -> float:
    """Squared Hellinger distance sum((sqrt p - sqrt q)^2), in [0, 2]."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DomainError(f"supports differ: {p.shape} vs {q.shape}")
    for name, d in (("p", p), ("q", q)):
        if np.any(d < 0) or abs(d.sum() - 1.0) > 1e-9:
            raise DomainError(f"{name} is not a probability distribution")
    return float(np.sum((np.sqrt(p) - np.sqrt(q)) ** 2))


def d_mu(theta, theta_prime, env_kind: str, weights=None) -> float:
    """Weighted root-sum of per-(s, a) squared Hellinger distances between
    transition kernels; ``weights`` default to uniform over (s, a)."""
    env = finite_environment(env_kind)
    if weights is None:
        weights = np.full((env.n_states, env.n_actions), 1.0 / (env.n_states * env.n_actions))
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (env.n_states, env.n_actions):
        raise DomainError(f"weights must have shape {(env.n_states, env.n_actions)}")
    if np.any(weights < 0):
        raise DomainError("weights must be nonnegative")
    P = env.model(theta, 0.5).transition
    Pp = env.model(theta_prime, 0.5).transition
    h2 = np.sum((np.sqrt(P) - np.sqrt(Pp)) ** 2, axis=2)
    return float(np.sqrt(np.sum(h2 * weights)))


@lru_cache(maxsize=None)
def _values(env_kind: str, theta: tuple, theta0: tuple, gamma: float):
    env = finite_environment(env_kind)
    pi = plan_for(env_kind, theta, gamma).pi_star
    pi0 = plan_for(env_kind, theta0, gamma).pi_star
    model, model0 = env.model(np.array(theta), gamma), env.model(np.array(theta0), gamma)
    return (
        policy_evaluation(model, pi),  # V_theta(pi*_theta)
        policy_evaluation(model0, pi),  # V_theta0(pi*_theta)
        policy_evaluation(model0, pi0),  # V_theta0(pi*_theta0)
    )


def regret_quantities(theta_sample, theta0, env_kind: str, gamma: float, s_eval: int = 0):
    """``(v_error, regret)`` at ``s_eval``.

    v_error = |V_theta(pi*_theta) - V_theta0(pi*_theta0)|
    regret  = |V_theta0(pi*_theta) - V_theta0(pi*_theta0)|
    All values come from exact policy evaluation, so equal policies give
    exactly zero regret.
    """
    key = lambda x: tuple(float(v) for v in np.ravel(x))  # noqa: E731
    v_own, v_true_pi, v_opt = _values(env_kind, key(theta_sample), key(theta0), float(gamma))
    return abs(v_own[s_eval] - v_opt[s_eval]), abs(v_true_pi[s_eval] - v_opt[s_eval])


def optimal_action_proportion(traj: Trajectory, pi_star_0: Policy) -> float:
    if not len(traj):
        raise DomainError("empty trajectory")
    best = pi_star_0.greedy_actions()
    states = np.asarray(traj.states[:-1])
    return float(np.mean(np.asarray(traj.actions) == best[states]))


def param_l2_error(theta_sample, theta0) -> float:
    a, b = np.ravel(theta_sample), np.ravel(theta0)
    if a.shape != b.shape:
        raise DomainError("parameter dimensions differ")
    return float(np.linalg.norm(a - b))


def loglog_slope(series: MetricSeries, t_min: int | None = None) -> float:
    """OLS slope of log(value) on log(t) over ``t >= t_min`` (default T/10)."""
    if t_min is None:
        t_min = max(1, int(series.times[-1]) // 10)
    keep = series.times >= t_min
    t, v = series.times[keep], series.values[keep]
    if t.size < 2:
        raise DomainError("need at least two points for a slope")
    if np.any(v <= 0) or np.any(t <= 0):
        raise DomainError("log-log slope needs positive times and values")
    x, y = np.log(t), np.log(v)
    x = x - x.mean()
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


def mean_and_stderr(values) -> tuple[float, float, int]:
    """Mean and s.d./sqrt(n) (ddof=1); a single value has stderr 0."""
    v = np.asarray(values, dtype=float)
    n = v.size
    if n == 0:
        raise DomainError("no values to summarise")
    se = float(np.std(v, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return float(np.mean(v)), se, n
