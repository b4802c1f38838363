"""Finite MDP models, stationary policies and trajectories."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .rng import RngStream

ROW_SUM_TOL = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class FiniteMdpModel:
    """Transition tensor ``transition[s, a, s']``, rewards ``reward[s, a]``, discount."""

    transition: np.ndarray
    reward: np.ndarray
    discount: float
    cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        P = _frozen(self.transition)
        R = _frozen(self.reward)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise DomainError(f"transition must have shape (S, A, S), got {P.shape}")
        if R.shape != P.shape[:2]:
            raise DomainError(f"reward shape {R.shape} does not match {P.shape[:2]}")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=2) - 1.0)) > ROW_SUM_TOL:
            raise DomainError("transition rows must be nonnegative and sum to 1")
        if not np.all(np.isfinite(R)):
            raise DomainError("reward table must be finite")
        if not 0.0 <= self.discount < 1.0:
            raise DomainError(f"discount must lie in [0, 1), got {self.discount}")
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "discount", float(self.discount))
        object.__setattr__(self, "cdf", _frozen(np.cumsum(P, axis=2)))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def reward_bound(self) -> float:
        return float(np.max(np.abs(self.reward)))


def step_finite(model: FiniteMdpModel, s: int, a: int, rng: RngStream) -> tuple[int, float]:
    """Draw ``s' ~ P[s, a, .]`` by inverse CDF; the reward is ``R[s, a]``."""
    if not (0 <= s < model.n_states and 0 <= a < model.n_actions):
        raise IndexError(f"(s={s}, a={a}) outside {model.n_states}x{model.n_actions} model")
    u = rng.random()
    nxt = int(np.searchsorted(model.cdf[s, a], u, side="right"))
    # cdf[-1] can round to just below 1
    nxt = min(nxt, model.n_states - 1)
    return nxt, float(model.reward[s, a])


@dataclass(frozen=True, eq=False)
class Policy:
    """Stationary policy.

    ``kind`` is ``"deterministic"`` (``table[s]`` is an action),
    ``"stochastic"`` (``table[s]`` is a distribution over actions) or
    ``"q_greedy"`` (``table[s]`` holds Q-values; argmax, lowest index wins).
    """

    kind: str
    table: np.ndarray

    def __post_init__(self):
        if self.kind == "deterministic":
            table = _frozen(self.table, dtype=np.int64)
            if table.ndim != 1:
                raise DomainError("deterministic policy table must be 1-d")
        elif self.kind in ("stochastic", "q_greedy"):
            table = _frozen(self.table)
            if table.ndim != 2:
                raise DomainError(f"{self.kind} policy table must be 2-d")
            if self.kind == "stochastic" and (
                np.any(table < 0) or np.max(np.abs(table.sum(axis=1) - 1.0)) > ROW_SUM_TOL
            ):
                raise DomainError("stochastic policy rows must be distributions")
        else:
            raise DomainError(f"unknown policy kind {self.kind!r}")
        object.__setattr__(self, "table", table)

    @classmethod
    def deterministic(cls, actions) -> "Policy":
        return cls("deterministic", actions)

    @classmethod
    def stochastic(cls, probs) -> "Policy":
        return cls("stochastic", probs)

    @classmethod
    def q_greedy(cls, q) -> "Policy":
        return cls("q_greedy", q)

    @property
    def n_states(self) -> int:
        return self.table.shape[0]

    def action_probabilities(self) -> np.ndarray:
        """Matrix ``pi[s, a]`` for exact policy evaluation."""
        if self.kind == "stochastic":
            return np.array(self.table)
        if self.kind == "q_greedy":
            actions = np.argmax(self.table, axis=1)
            n_actions = self.table.shape[1]
        else:
            actions = self.table
            n_actions = int(actions.max()) + 1
        out = np.zeros((len(actions), n_actions))
        out[np.arange(len(actions)), actions] = 1.0
        return out

    def greedy_actions(self) -> np.ndarray:
        if self.kind == "deterministic":
            return np.array(self.table)
        if self.kind == "q_greedy":
            return np.argmax(self.table, axis=1)
        raise DomainError("stochastic policy has no greedy action table")


def policy_action(policy: Policy, s: int, rng: RngStream | None = None) -> int:
    if not 0 <= s < policy.n_states:
        raise DomainError(f"state {s} outside policy domain of size {policy.n_states}")
    if policy.kind == "deterministic":
        return int(policy.table[s])
    if policy.kind == "q_greedy":
        # np.argmax returns the first maximiser
        return int(np.argmax(policy.table[s]))
    if rng is None:
        raise DomainError("stochastic policy needs an RngStream")
    cdf = np.cumsum(policy.table[s])
    return min(int(np.searchsorted(cdf, rng.random(), side="right")), len(cdf) - 1)


@dataclass
class Trajectory:
    """History ``S_0, A_0, R_0, S_1, ...`` of a single run."""

    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)

    @classmethod
    def start(cls, s0) -> "Trajectory":
        return cls(states=[s0])

    def record(self, action, reward, next_state) -> None:
        if len(self.states) != len(self.actions) + 1:
            raise RuntimeError("trajectory must start from an initial state")
        self.actions.append(action)
        self.rewards.append(reward)
        self.states.append(next_state)

    @property
    def current_state(self):
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.actions)
