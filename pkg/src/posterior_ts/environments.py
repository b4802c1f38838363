"""The three simulation environments: toy 2-state MDP, RiverSwim and glucose.

Finite environments are exposed both as plain model constructors
(``toy_model``, ``riverswim_model``) and as small environment objects that
also know which observed transitions are informative about which dynamics
parameter (``observation``). Those Bernoulli success/failure events are the
sufficient statistics consumed by the grid posterior.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError
from .mdp import FiniteMdpModel
from .rng import RngStream

THETA_LOW, THETA_HIGH = 0.01, 0.99


def _check_theta(name: str, value: float) -> float:
    value = float(value)
    if not THETA_LOW <= value <= THETA_HIGH:
        raise DomainError(f"{name}={value} outside [{THETA_LOW}, {THETA_HIGH}]")
    return value


# --------------------------------------------------------------------------
# Toy example
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ToyParams:
    theta1: float
    theta2: float

    def __post_init__(self):
        object.__setattr__(self, "theta1", _check_theta("theta1", self.theta1))
        object.__setattr__(self, "theta2", _check_theta("theta2", self.theta2))

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2])


TOY_REWARD = np.array([[2.0, 1.5], [0.5, 1.0]])


def toy_model(params: ToyParams, gamma: float) -> FiniteMdpModel:
    t1, t2 = params.theta1, params.theta2
    P = np.empty((2, 2, 2))
    P[1, 1] = (1 - t1, t1)
    P[1, 0] = (t1, 1 - t1)
    P[0, 1] = (1 - t2, t2)
    P[0, 0] = (t2, 1 - t2)
    return FiniteMdpModel(P, TOY_REWARD, gamma)


# --------------------------------------------------------------------------
# RiverSwim
# --------------------------------------------------------------------------

LEFT, RIGHT = 0, 1
RIVERSWIM_STATES = 6


@dataclass(frozen=True)
class RiverSwimParams:
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", _check_theta("theta", self.theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.theta])


def riverswim_model(params: RiverSwimParams, gamma: float) -> FiniteMdpModel:
    """Six-state chain, internal states 0..5 (1..6 externally).

    Left always moves one state left (state 0 stays put). Right moves one
    state right with probability ``theta`` and otherwise stays; at the last
    state both outcomes leave the swimmer where he is.
    """
    n = RIVERSWIM_STATES
    P = np.zeros((n, 2, n))
    R = np.zeros((n, 2))
    for s in range(n):
        P[s, LEFT, max(s - 1, 0)] = 1.0
        P[s, RIGHT, min(s + 1, n - 1)] += params.theta
        P[s, RIGHT, s] += 1.0 - params.theta
    R[0, LEFT] = 2.0
    R[n - 1, RIGHT] = 10.0
    return FiniteMdpModel(P, R, gamma)


def riverswim_state(external: int) -> int:
    """Map 1-based state label to the internal index."""
    if not 1 <= external <= RIVERSWIM_STATES:
        raise DomainError(f"RiverSwim state must be in 1..{RIVERSWIM_STATES}, got {external}")
    return external - 1


# --------------------------------------------------------------------------
# Finite environment wrappers
# --------------------------------------------------------------------------


class ToyEnvironment:
    kind = "toy"
    n_params = 2
    n_states = 2
    n_actions = 2

    def params(self, theta) -> ToyParams:
        return ToyParams(*np.asarray(theta, dtype=float))

    def model(self, theta, gamma: float) -> FiniteMdpModel:
        return toy_model(self.params(theta), gamma)

    @staticmethod
    def observation(s: int, a: int, s_next: int):
        """Return ``(param_index, success)`` for the Bernoulli event observed.

        In state 1 the next state is Bin(1, theta1) under action 1 and
        Bin(1, 1 - theta1) under action 0; state 0 likewise with theta2.
        """
        param = 0 if s == 1 else 1
        success = (s_next == 1) if a == 1 else (s_next == 0)
        return param, success


class RiverSwimEnvironment:
    kind = "riverswim"
    n_params = 1
    n_states = RIVERSWIM_STATES
    n_actions = 2

    def params(self, theta) -> RiverSwimParams:
        return RiverSwimParams(float(np.ravel(theta)[0]))

    def model(self, theta, gamma: float) -> FiniteMdpModel:
        return riverswim_model(self.params(theta), gamma)

    @staticmethod
    def observation(s: int, a: int, s_next: int):
        # left moves and right moves from the last state carry no information
        if a != RIGHT or s == RIVERSWIM_STATES - 1:
            return None
        return 0, s_next == s + 1


FINITE_ENVIRONMENTS = {"toy": ToyEnvironment, "riverswim": RiverSwimEnvironment}


def finite_environment(kind: str):
    try:
        return FINITE_ENVIRONMENTS[kind]()
    except KeyError:
        raise DomainError(f"unknown finite environment {kind!r}") from None


# --------------------------------------------------------------------------
# Glucose
# --------------------------------------------------------------------------

TRUE_BETA = (10.0, 0.9, 0.1, -0.01, 0.0, 0.1, -0.01, -10.0, -4.0)
N_GLUCOSE_FEATURES = 7
GLUCOSE_FEATURES = ("gl", "di", "ex", "gl_prev", "di_prev", "ex_prev", "a_prev")


@dataclass(frozen=True)
class GlucoseParams:
    beta: tuple = TRUE_BETA
    sigma: float = 5.0
    mu_d: float = 0.0
    sigma_d: float = 10.0
    p_d: float = 0.6
    mu_e: float = 0.0
    sigma_e: float = 10.0
    p_e: float = 0.6
    # initialisation, not given by the generative model itself
    gl_init: float = 100.0

    def __post_init__(self):
        beta = tuple(float(b) for b in np.ravel(self.beta))
        if len(beta) != 9:
            raise DomainError(f"beta must have 9 entries, got {len(beta)}")
        object.__setattr__(self, "beta", beta)
        if self.sigma < 0:
            raise DomainError("sigma must be nonnegative")
        if not (0 <= self.p_d <= 1 and 0 <= self.p_e <= 1):
            raise DomainError("mixture probabilities must lie in [0, 1]")

    def with_beta(self, beta) -> "GlucoseParams":
        return replace(self, beta=tuple(np.ravel(beta)))


@dataclass(frozen=True)
class GlucoseState:
    gl: float
    di: float
    ex: float
    gl_prev: float
    di_prev: float
    ex_prev: float
    a_prev: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.features())):
            raise DomainError("glucose state must be finite")

    def features(self) -> np.ndarray:
        return np.array(
            [self.gl, self.di, self.ex, self.gl_prev, self.di_prev, self.ex_prev, self.a_prev],
            dtype=float,
        )

    @classmethod
    def from_features(cls, x) -> "GlucoseState":
        x = np.asarray(x, dtype=float)
        return cls(*x[:6], a_prev=int(round(x[6])))


def glucose_reward(gl):
    """Piecewise quadratic penalty on glucose; the ``gl >= 70`` branch is used at 70."""
    gl = np.asarray(gl, dtype=float)
    low = -0.005 * gl**2 + 0.95 * gl - 45.0
    high = -0.0002 * gl**2 + 0.022 * gl - 0.5
    out = np.where(gl < 70.0, low, high)
    return float(out) if out.ndim == 0 else out


def _mixture(rng: RngStream, n: int, mu: float, sd: float, p: float) -> np.ndarray:
    on = rng.random(n) < p
    return np.where(on, mu + sd * rng.normal(n), 0.0)


def glucose_initial_states(params: GlucoseParams, n: int, rng: RngStream) -> np.ndarray:
    """Feature rows ``(gl, di, ex, gl_prev, di_prev, ex_prev, a_prev)`` at time 0."""
    x = np.zeros((n, N_GLUCOSE_FEATURES))
    x[:, 0] = x[:, 3] = params.gl_init
    x[:, 1] = _mixture(rng, n, params.mu_d, params.sigma_d, params.p_d)
    x[:, 2] = _mixture(rng, n, params.mu_e, params.sigma_e, params.p_e)
    x[:, 4] = _mixture(rng, n, params.mu_d, params.sigma_d, params.p_d)
    x[:, 5] = _mixture(rng, n, params.mu_e, params.sigma_e, params.p_e)
    return x


def design_rows(states: np.ndarray, actions) -> np.ndarray:
    """Regression rows ``(1, Gl_t, Di_t, Ex_t, Gl_t-1, Di_t-1, Ex_t-1, A_t-1, A_t)``."""
    states = np.atleast_2d(states)
    actions = np.broadcast_to(np.asarray(actions, dtype=float), (states.shape[0],))
    return np.column_stack([np.ones(states.shape[0]), states, actions])


def glucose_step_batch(
    params: GlucoseParams, states: np.ndarray, actions, rng: RngStream
) -> tuple[np.ndarray, np.ndarray]:
    """Advance a cohort one step; returns next feature rows and rewards."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    n = states.shape[0]
    actions = np.broadcast_to(np.asarray(actions, dtype=float), (n,))
    noise = rng.normal(n)
    gl_next = design_rows(states, actions) @ np.asarray(params.beta) + params.sigma * noise
    nxt = np.empty_like(states)
    nxt[:, 0] = gl_next
    nxt[:, 1] = _mixture(rng, n, params.mu_d, params.sigma_d, params.p_d)
    nxt[:, 2] = _mixture(rng, n, params.mu_e, params.sigma_e, params.p_e)
    nxt[:, 3:6] = states[:, 0:3]
    nxt[:, 6] = actions
    return nxt, glucose_reward(gl_next)


def glucose_step(
    params: GlucoseParams, s: GlucoseState, a: int, rng: RngStream
) -> tuple[GlucoseState, float]:
    if a not in (0, 1):
        raise DomainError(f"glucose action must be 0 or 1, got {a}")
    nxt, reward = glucose_step_batch(params, s.features()[None, :], [a], rng)
    return GlucoseState.from_features(nxt[0]), float(np.ravel(reward)[0])
