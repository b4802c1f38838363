"""Online agents.

Finite environments (toy, RiverSwim) use a grid posterior over the
transition parameters and exact value iteration as the planner:

* ``EpsilonGreedyTS`` -- at every step flip a coin with probability
  ``delta_t``; on the greedy branch draw a fresh parameter from the
  posterior, plan, and act optimally for the draw; otherwise act uniformly.
* ``DSPSRLAgent``, ``TSMDPAgent``, ``TSDEAgent`` -- posterior sampling
  baselines that act greedily and differ only in when they resample
  (deterministic doubling schedule, returns to a reference state, dynamic
  episodes). These are reconstructions of the usual schedules.
* ``UniformAgent`` -- uniformly random actions; it still keeps the
  posterior current so its concentration can be measured.

Glucose agents act on a whole cohort at once and plan with fitted Q
iteration on data simulated from a posterior draw of the regression
coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .environments import (
    GlucoseParams,
    design_rows,
    finite_environment,
)
from .errors import DomainError
from .fqi import FittedQ, RegressorConfig, TransitionBatch, fitted_q_iteration, simulate_dataset
from .inference import (
    GaussianPosterior,
    GridPosterior,
    SufficientCounts,
    blr_sample,
    blr_update,
    grid_sample_index,
    grid_update,
)
from .planning import PlanResult, value_iteration
from .rng import RngStream


# --------------------------------------------------------------------------
# Exploration schedules
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DeltaSchedule:
    """Exploration probability ``delta_t``.

    ``constant``: c; ``inverse_t``: min(1, 1/max(t, 1));
    ``power``: min(1, max(t, 1) ** p).
    """

    kind: str
    value: float = 0.0

    def __post_init__(self):
        if self.kind == "constant" and not 0.0 <= self.value <= 1.0:
            raise DomainError(f"constant delta must lie in [0, 1], got {self.value}")
        if self.kind not in ("constant", "inverse_t", "power"):
            raise DomainError(f"unknown delta schedule {self.kind!r}")

    @classmethod
    def constant(cls, c: float) -> "DeltaSchedule":
        return cls("constant", float(c))

    @classmethod
    def inverse_t(cls) -> "DeltaSchedule":
        return cls("inverse_t")

    @classmethod
    def power(cls, p: float) -> "DeltaSchedule":
        return cls("power", float(p))

    @classmethod
    def parse(cls, text: str) -> "DeltaSchedule":
        """``const:<c>``, ``inv_t`` or ``pow:<p>``."""
        head, _, arg = text.partition(":")
        try:
            if head == "const":
                return cls.constant(float(arg))
            if head == "inv_t" and not arg:
                return cls.inverse_t()
            if head == "pow":
                return cls.power(float(arg))
        except ValueError:
            pass
        raise DomainError(f"cannot parse delta schedule {text!r}")

    @property
    def label(self) -> str:
        if self.kind == "constant":
            return f"const:{self.value:g}"
        if self.kind == "inverse_t":
            return "inv_t"
        return f"pow:{self.value:g}"

    def __call__(self, t: int) -> float:
        if self.kind == "constant":
            return self.value
        tt = max(int(t), 1)
        if self.kind == "inverse_t":
            return min(1.0, 1.0 / tt)
        return min(1.0, max(0.0, tt**self.value))


def is_doubling_time(k: int) -> bool:
    """True for k in {1, 2, 4, 8, ...}."""
    return k >= 1 and (k & (k - 1)) == 0


# --------------------------------------------------------------------------
# Finite-environment agents
# --------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _plan_cached(env_kind: str, theta: tuple, gamma: float) -> PlanResult:
    return value_iteration(finite_environment(env_kind).model(np.array(theta), gamma))


def plan_for(env_kind: str, theta, gamma: float) -> PlanResult:
    """Optimal plan for a parameter; memoised since draws are grid points."""
    return _plan_cached(env_kind, tuple(float(x) for x in np.ravel(theta)), float(gamma))


class FiniteAgent:
    """Posterior bookkeeping shared by the finite-environment agents."""

    name = "base"

    def __init__(self, env_kind: str, gamma: float, rng: RngStream,
                 grid_points: int = 1024, posterior: GridPosterior | None = None):
        self.env = finite_environment(env_kind)
        self.gamma = gamma
        self.counts = SufficientCounts.zeros(self.env.n_params)
        self.prior = posterior or GridPosterior.uniform(grid_points, self.env.n_params)
        self._posterior = self.prior
        self._stale = False
        self.rng_posterior = rng.child("posterior")
        self.rng_explore = rng.child("explore-u")
        self.rng_action = rng.child("explore-action")
        self.theta = None
        self.theta_index = None
        self.plan: PlanResult | None = None
        self.n_resamples = 0
        self.n_explore = 0
        self.resampled = False

    @property
    def posterior(self) -> GridPosterior:
        if self._stale:
            self._posterior = grid_update(self.prior, self.counts)
            self._stale = False
        return self._posterior

    def resample(self) -> None:
        post = self.posterior
        self.theta_index = grid_sample_index(post, self.rng_posterior)
        self.theta = post.point(self.theta_index)
        self.plan = plan_for(self.env.kind, self.theta, self.gamma)
        self.n_resamples += 1
        self.resampled = True

    def greedy_action(self, s: int) -> int:
        return int(self.plan.pi_star.table[s])

    def uniform_action(self) -> int:
        return int(self.rng_action.integers(self.env.n_actions))

    def act(self, s: int, t: int) -> int:
        raise NotImplementedError

    def observe(self, s: int, a: int, r: float, s_next: int) -> None:
        obs = self.env.observation(s, a, s_next)
        if obs is not None:
            self.counts.add(*obs)
            self._stale = True


class EpsilonGreedyTS(FiniteAgent):
    name = "ets"

    def __init__(self, env_kind, gamma, rng, schedule: DeltaSchedule, **kw):
        super().__init__(env_kind, gamma, rng, **kw)
        self.schedule = schedule

    def act(self, s, t):
        self.resampled = False
        u = self.rng_explore.random()
        if u > self.schedule(t):
            self.resample()
            return self.greedy_action(s)
        self.n_explore += 1
        return self.uniform_action()


class DSPSRLAgent(FiniteAgent):
    """Resamples at steps k = t + 1 in {1, 2, 4, 8, ...}."""

    name = "dspsrl"

    def act(self, s, t):
        self.resampled = False
        if self.plan is None or is_doubling_time(t + 1):
            self.resample()
        return self.greedy_action(s)


class TSMDPAgent(FiniteAgent):
    """Resamples whenever the chain is in the reference state."""

    name = "tsmdp"

    def __init__(self, env_kind, gamma, rng, reference_state: int = 0, **kw):
        super().__init__(env_kind, gamma, rng, **kw)
        self.reference_state = reference_state

    def act(self, s, t):
        self.resampled = False
        if self.plan is None or s == self.reference_state:
            self.resample()
        return self.greedy_action(s)


class TSDEAgent(FiniteAgent):
    """Dynamic episodes: a new one starts when the current episode is longer
    than the previous one, or some (s, a) visit count has more than doubled
    since the episode began."""

    name = "tsde"

    def __init__(self, env_kind, gamma, rng, **kw):
        super().__init__(env_kind, gamma, rng, **kw)
        self.visits = np.zeros((self.env.n_states, self.env.n_actions), dtype=np.int64)
        self.visits_at_start = self.visits.copy()
        self.episode_start = 0
        self.prev_length = 0
        self.episode_lengths: list[int] = []

    def act(self, s, t):
        self.resampled = False
        if self.plan is None:
            new = True
        else:
            new = (t - self.episode_start > self.prev_length) or bool(
                np.any(self.visits > 2 * self.visits_at_start)
            )
            if new:
                self.prev_length = t - self.episode_start
                self.episode_lengths.append(self.prev_length)
        if new:
            self.episode_start = t
            self.visits_at_start = self.visits.copy()
            self.resample()
        return self.greedy_action(s)

    def observe(self, s, a, r, s_next):
        self.visits[s, a] += 1
        super().observe(s, a, r, s_next)


class UniformAgent(FiniteAgent):
    name = "uniform"

    def act(self, s, t):
        self.resampled = False
        return self.uniform_action()


def uniform_agent_step(n_actions: int, rng: RngStream) -> int:
    return int(rng.integers(n_actions))


# --------------------------------------------------------------------------
# Glucose agents
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FqiSettings:
    n_iters: int = 5
    gamma: float = 0.9
    n_tuples: int = 2000
    episode_length: int = 30
    regressor: RegressorConfig = field(default_factory=RegressorConfig)


class GlucoseAgent:
    """Acts for every patient in a cohort at each time step."""

    name = "base"

    def __init__(self, params: GlucoseParams, rng: RngStream, fqi: FqiSettings = FqiSettings()):
        self.params = params
        self.fqi = fqi
        self.rng_explore = rng.child("explore-u")
        self.rng_action = rng.child("explore-action")
        self.rng_plan = rng.child("plan")
        self.q: FittedQ | None = None
        self.n_replans = 0

    def uniform_actions(self, n: int) -> np.ndarray:
        return self.rng_action.integers(2, size=n).astype(np.int64)

    def plan_under(self, beta) -> FittedQ:
        """FQI on data simulated from the dynamics with coefficients ``beta``."""
        dyn = self.params.with_beta(beta)
        step_rng = self.rng_plan.child(f"replan-{self.n_replans}")
        data = simulate_dataset(dyn, self.fqi.n_tuples, step_rng.child("data"),
                                self.fqi.episode_length)
        self.n_replans += 1
        return fitted_q_iteration(data, self.fqi.n_iters, self.fqi.gamma,
                                  self.fqi.regressor, step_rng.child("fit"))

    def act(self, states: np.ndarray, t: int) -> np.ndarray:
        raise NotImplementedError

    def observe(self, states, actions, rewards, next_states) -> None:
        pass


class _GlucosePosteriorAgent(GlucoseAgent):
    def __init__(self, params, rng, fqi=FqiSettings(), prior_variance: float = 0.25):
        super().__init__(params, rng, fqi)
        self.posterior = GaussianPosterior.prior(9, prior_variance, params.sigma)
        self.rng_posterior = rng.child("posterior")
        self.beta = None

    def replan(self) -> None:
        self.beta = blr_sample(self.posterior, self.rng_posterior)
        self.q = self.plan_under(self.beta)

    def observe(self, states, actions, rewards, next_states):
        X = design_rows(states, actions)
        self.posterior = blr_update(self.posterior.mean, self.posterior.covariance,
                                    X, next_states[:, 0], self.params.sigma)


class GlucoseETS(_GlucosePosteriorAgent):
    """One posterior draw and FQI fit per time step, shared by the cohort;
    each patient explores independently with probability delta_t."""

    name = "ets"

    def __init__(self, params, rng, schedule: DeltaSchedule, fqi=FqiSettings(), **kw):
        super().__init__(params, rng, fqi, **kw)
        self.schedule = schedule

    def act(self, states, t):
        n = len(states)
        explore = self.rng_explore.random(n) <= self.schedule(t)
        uniform = self.uniform_actions(n)
        if explore.all():
            return uniform
        self.replan()
        return np.where(explore, uniform, self.q.greedy(states))


class GlucoseDSPSRL(_GlucosePosteriorAgent):
    name = "dspsrl"

    def act(self, states, t):
        if self.q is None or is_doubling_time(t + 1):
            self.replan()
        return self.q.greedy(states)


class GlucoseGold(GlucoseAgent):
    """FQI on data from the true coefficients; never looks at a posterior."""

    name = "gold"

    def act(self, states, t):
        if self.q is None:
            self.q = self.plan_under(self.params.beta)
        return self.q.greedy(states)


class GlucoseNaiveFQI(GlucoseAgent):
    """Model-free: FQI on the observed history only, refitted every step.

    Acts uniformly until ``min_history`` tuples have been observed.
    """

    name = "naive_fqi"

    def __init__(self, params, rng, fqi=FqiSettings(), min_history: int = 50):
        super().__init__(params, rng, fqi)
        self.min_history = min_history
        self.history: list[TransitionBatch] = []
        self.n_history = 0

    def act(self, states, t):
        if self.n_history < self.min_history:
            return self.uniform_actions(len(states))
        data = TransitionBatch.concatenate(self.history)
        self.q = fitted_q_iteration(data, self.fqi.n_iters, self.fqi.gamma, self.fqi.regressor,
                                    self.rng_plan.child(f"fit-{self.n_replans}"))
        self.n_replans += 1
        return self.q.greedy(states)

    def observe(self, states, actions, rewards, next_states):
        self.history.append(TransitionBatch(np.array(states), np.array(actions),
                                            np.array(rewards), np.array(next_states)))
        self.n_history += len(states)


class GlucoseUniform(GlucoseAgent):
    name = "uniform"

    def act(self, states, t):
        return self.uniform_actions(len(states))
