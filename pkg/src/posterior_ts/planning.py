"""Exact planning for finite discounted MDPs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, DomainError, NumericalError
from .mdp import FiniteMdpModel, Policy

VI_TOL = 1e-10
VI_MAX_ITERS = 100_000


@dataclass(frozen=True, eq=False)
class QTable:
    values: np.ndarray
    discount: float

    def greedy(self) -> np.ndarray:
        # argmax picks the lowest index among ties
        return np.argmax(self.values, axis=1)


class PlanResult(NamedTuple):
    V: np.ndarray
    Q: QTable
    pi_star: Policy
    residual: float
    iterations: int


def bellman_q(model: FiniteMdpModel, V: np.ndarray) -> np.ndarray:
    return model.reward + model.discount * (model.transition @ V)


def value_iteration(
    model: FiniteMdpModel, tol: float = VI_TOL, max_iters: int = VI_MAX_ITERS, V0=None
) -> PlanResult:
    """Iterate the Bellman optimality operator until ``||TV - V||_inf <= tol``.

    The returned ``residual`` is the sup-norm residual of the returned ``V``.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    V = np.zeros(model.n_states) if V0 is None else np.array(V0, dtype=float)
    P, R, g = model.transition, model.reward, model.discount
    Q = R + g * (P @ V)
    V_new = Q.max(axis=1)
    residual = float(np.max(np.abs(V_new - V)))
    it = 0
    while residual > tol:
        if it >= max_iters:
            raise ConvergenceError(f"value iteration did not converge in {max_iters} sweeps", residual)
        V = V_new
        Q = R + g * (P @ V)
        V_new = Q.max(axis=1)
        residual = float(np.max(np.abs(V_new - V)))
        it += 1
    # V satisfies the tolerance; Q and the greedy policy are derived from it
    Q = R + g * (P @ V)
    actions = np.argmax(Q, axis=1)
    # Polish with one exact evaluation of the greedy policy. Its error is
    # then rounding only rather than up to g * tol / (1 - g).
    idx = np.arange(model.n_states)
    try:
        V_pe = np.linalg.solve(np.eye(model.n_states) - g * P[idx, actions], R[idx, actions])
    except np.linalg.LinAlgError:
        V_pe = None
    if V_pe is not None:
        Q_pe = R + g * (P @ V_pe)
        res_pe = float(np.max(np.abs(Q_pe.max(axis=1) - V_pe)))
        if res_pe <= residual and np.array_equal(np.argmax(Q_pe, axis=1), actions):
            V, Q, residual = V_pe, Q_pe, res_pe
    pi = Policy.deterministic(actions)
    return PlanResult(V, QTable(Q, g), pi, residual, it + 1)


def policy_evaluation(model: FiniteMdpModel, policy: Policy, tol: float = VI_TOL) -> np.ndarray:
    """Value of a stationary policy by a direct linear solve of ``(I - g P_pi) V = r_pi``."""
    pi = policy.action_probabilities()
    if pi.shape[0] != model.n_states or pi.shape[1] > model.n_actions:
        raise DomainError("policy does not match the model's state/action spaces")
    if pi.shape[1] < model.n_actions:
        pi = np.pad(pi, ((0, 0), (0, model.n_actions - pi.shape[1])))
    P_pi = np.einsum("sa,sat->st", pi, model.transition)
    r_pi = np.einsum("sa,sa->s", pi, model.reward)
    A = np.eye(model.n_states) - model.discount * P_pi
    try:
        V = np.linalg.solve(A, r_pi)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular policy-evaluation system") from exc
    residual = np.max(np.abs(r_pi + model.discount * P_pi @ V - V))
    if residual > max(tol, 1e-9 * max(1.0, np.max(np.abs(V)))):
        raise NumericalError(f"policy evaluation residual {residual:.3e} exceeds tolerance")
    return V
