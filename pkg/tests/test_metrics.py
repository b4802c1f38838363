import itertools

import numpy as np
import pytest

from posterior_ts.environments import ToyParams, toy_model
from posterior_ts.errors import DomainError
from posterior_ts.mdp import Policy, Trajectory
from posterior_ts.metrics import (
    MetricSeries,
    d_mu,
    hellinger_sq,
    loglog_slope,
    mean_and_stderr,
    optimal_action_proportion,
    param_l2_error,
    regret_quantities,
)

# (sqrt(.2) - sqrt(.4))^2 + (sqrt(.8) - sqrt(.6))^2 evaluated with mpmath at 40 digits
H2_BERN_02_04 = 0.04867392899566014565736743711142287501789
# sqrt(2 * H2 / 4): the two state-1 pairs differ, the state-0 pairs coincide
D_MU_TOY = 0.1560030913085701


def series(values, times=None):
    values = np.asarray(values, dtype=float)
    times = np.arange(1, len(values) + 1) if times is None else np.asarray(times)
    return MetricSeries("x", times, values, 0, "a", "s")


def enumerated_values(theta, gamma):
    """All four deterministic toy policies evaluated by a linear solve."""
    m = toy_model(ToyParams(*theta), gamma)
    P, R = np.array(m.transition), np.array(m.reward)
    out = {}
    for acts in itertools.product((0, 1), repeat=2):
        a = np.array(acts)
        out[acts] = np.linalg.solve(np.eye(2) - gamma * P[[0, 1], a], R[[0, 1], a])
    return out


class TestHellinger:
    def test_identical(self):
        assert hellinger_sq([0.3, 0.7], [0.3, 0.7]) == 0.0

    def test_disjoint(self):
        assert hellinger_sq([1.0, 0.0], [0.0, 1.0]) == 2.0

    def test_bernoulli_value(self):
        assert hellinger_sq([0.8, 0.2], [0.6, 0.4]) == pytest.approx(H2_BERN_02_04, abs=1e-15)

    def test_support_mismatch(self):
        with pytest.raises(DomainError):
            hellinger_sq([0.5, 0.5], [1.0, 0.0, 0.0])

    def test_not_a_distribution(self):
        with pytest.raises(DomainError):
            hellinger_sq([0.5, 0.6], [0.5, 0.5])


class TestDMu:
    def test_identical(self):
        assert d_mu((0.2, 0.4), (0.2, 0.4), "toy") == 0.0

    def test_toy_value(self):
        assert d_mu((0.2, 0.4), (0.4, 0.4), "toy") == pytest.approx(D_MU_TOY, abs=1e-12)
        assert D_MU_TOY == pytest.approx(np.sqrt(2 * H2_BERN_02_04 / 4), abs=1e-15)

    def test_zero_weights(self):
        assert d_mu((0.1, 0.2), (0.9, 0.7), "toy", np.zeros((2, 2))) == 0.0

    def test_negative_weight(self):
        w = np.full((2, 2), 0.25)
        w[0, 0] = -0.1
        with pytest.raises(DomainError):
            d_mu((0.1, 0.2), (0.9, 0.7), "toy", w)

    def test_riverswim(self):
        # right moves from states 1..5 differ; the clamped last state and left moves do not
        h2 = hellinger_sq([0.5, 0.5], [0.9, 0.1])
        assert d_mu((0.5,), (0.9,), "riverswim") == pytest.approx(np.sqrt(5 * h2 / 12), abs=1e-14)


class TestRegretQuantities:
    def test_true_parameter(self):
        assert regret_quantities((0.2, 0.4), (0.2, 0.4), "toy", 0.25) == (0.0, 0.0)

    @pytest.mark.parametrize("gamma", [0.25, 0.9])
    @pytest.mark.parametrize("theta", [(0.95, 0.05), (0.05, 0.95), (0.99, 0.01), (0.6, 0.9)])
    def test_against_enumeration(self, theta, gamma):
        theta0 = (0.2, 0.4)
        own = enumerated_values(theta, gamma)
        true = enumerated_values(theta0, gamma)
        pi = max(own, key=lambda a: own[a][0])
        pi0 = max(true, key=lambda a: true[a][0])
        v_error, regret = regret_quantities(theta, theta0, "toy", gamma)
        assert regret == pytest.approx(true[pi0][0] - true[pi][0], abs=1e-9)
        assert v_error == pytest.approx(abs(own[pi][0] - true[pi0][0]), abs=1e-9)

    def test_regret_can_be_positive(self):
        # with a long horizon the sampled plan can differ from the true one
        assert regret_quantities((0.99, 0.01), (0.2, 0.4), "toy", 0.9)[1] > 0


class TestOptimalActionProportion:
    def _traj(self, actions, states):
        tr = Trajectory.start(states[0])
        for a, s in zip(actions, states[1:]):
            tr.record(a, 0.0, s)
        return tr

    def test_always_and_never(self):
        pi = Policy.deterministic([0, 1])
        states = [0, 1, 1, 0, 0]
        good = [pi.table[s] for s in states[:-1]]
        assert optimal_action_proportion(self._traj(good, states), pi) == 1.0
        bad = [1 - a for a in good]
        assert optimal_action_proportion(self._traj(bad, states), pi) == 0.0

    def test_empty(self):
        with pytest.raises(DomainError):
            optimal_action_proportion(Trajectory.start(0), Policy.deterministic([0]))


class TestParamError:
    def test_values(self):
        assert param_l2_error((0.2, 0.4), (0.2, 0.4)) == 0.0
        assert param_l2_error((0.2, 0.4), (0.4, 0.4)) == pytest.approx(0.2)
        assert param_l2_error((0.0, 0.0), (0.3, 0.4)) == pytest.approx(0.5)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            param_l2_error((0.1,), (0.1, 0.2))


class TestLoglogSlope:
    t = np.arange(1, 2001)

    def test_half(self):
        assert loglog_slope(series(self.t**-0.5)) == pytest.approx(-0.5, abs=1e-9)

    def test_constant(self):
        assert loglog_slope(series(np.full(100, 3.0))) == pytest.approx(0.0, abs=1e-12)

    def test_scaled_quarter(self):
        assert loglog_slope(series(3 * self.t**-0.25), 200) == pytest.approx(-0.25, abs=1e-9)

    def test_nonpositive(self):
        with pytest.raises(DomainError):
            loglog_slope(series([1.0, 0.0, 1.0]), 1)

    def test_default_window_skips_transient(self):
        v = self.t**-0.5
        v[:100] = 50.0
        assert loglog_slope(series(v)) == pytest.approx(-0.5, abs=1e-9)


class TestMeanAndStderr:
    def test_two_point(self):
        mean, se, n = mean_and_stderr([0.9, 1.1])
        assert (mean, n) == (pytest.approx(1.0), 2)
        assert se == pytest.approx(0.1)

    def test_single(self):
        assert mean_and_stderr([4.0]) == (4.0, 0.0, 1)

    def test_empty(self):
        with pytest.raises(DomainError):
            mean_and_stderr([])


class TestMetricSeries:
    def test_times_strictly_increasing(self):
        with pytest.raises(DomainError):
            MetricSeries("x", np.array([1, 1]), np.array([0.0, 1.0]), 0, "a", "s")

    def test_lengths(self):
        with pytest.raises(DomainError):
            MetricSeries("x", np.array([1, 2]), np.array([0.0]), 0, "a", "s")

    def test_at(self):
        assert series([5.0, 6.0, 7.0]).at(2) == 6.0
