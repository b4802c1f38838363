import numpy as np
import pytest

from posterior_ts.environments import (
    LEFT,
    RIGHT,
    TRUE_BETA,
    GlucoseParams,
    GlucoseState,
    RiverSwimEnvironment,
    RiverSwimParams,
    ToyEnvironment,
    ToyParams,
    design_rows,
    glucose_initial_states,
    glucose_reward,
    glucose_step,
    glucose_step_batch,
    riverswim_model,
    riverswim_state,
    toy_model,
)
from posterior_ts.errors import DomainError
from posterior_ts.rng import RngStream


class TestToy:
    def test_transition_and_reward(self):
        m = toy_model(ToyParams(0.2, 0.4), 0.25)
        np.testing.assert_allclose(m.transition[0, 1], [0.6, 0.4])
        assert m.reward[0, 1] == 1.5
        np.testing.assert_allclose(m.transition[1, 1], [0.8, 0.2])
        np.testing.assert_allclose(m.transition[1, 0], [0.2, 0.8])
        np.testing.assert_allclose(m.transition[0, 0], [0.4, 0.6])
        np.testing.assert_array_equal(m.reward, [[2.0, 1.5], [0.5, 1.0]])

    def test_symmetric_parameter(self):
        m = toy_model(ToyParams(0.5, 0.5), 0.25)
        np.testing.assert_array_equal(m.transition, np.full((2, 2, 2), 0.5))

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 0.995])
    def test_parameter_bounds(self, bad):
        with pytest.raises(DomainError):
            ToyParams(bad, 0.5)

    @pytest.mark.parametrize(
        "s, a, s_next, expected",
        [
            (1, 1, 1, (0, True)),
            (1, 1, 0, (0, False)),
            (1, 0, 1, (0, False)),
            (1, 0, 0, (0, True)),
            (0, 1, 1, (1, True)),
            (0, 0, 0, (1, True)),
            (0, 0, 1, (1, False)),
        ],
    )
    def test_observation_routing(self, s, a, s_next, expected):
        assert ToyEnvironment.observation(s, a, s_next) == expected

    def test_observation_success_probability_is_parameter(self):
        # the counted success event has probability equal to its parameter
        m = toy_model(ToyParams(0.2, 0.4), 0.25)
        theta = (0.2, 0.4)
        for s in (0, 1):
            for a in (0, 1):
                p_success = sum(
                    m.transition[s, a, sn]
                    for sn in (0, 1)
                    if ToyEnvironment.observation(s, a, sn)[1]
                )
                param = ToyEnvironment.observation(s, a, 0)[0]
                assert p_success == pytest.approx(theta[param])


class TestRiverSwim:
    def test_left_always_succeeds(self):
        m = riverswim_model(RiverSwimParams(0.9), 0.99)
        s = riverswim_state(3)
        assert m.transition[s, LEFT, riverswim_state(2)] == 1.0

    def test_right_clamped_at_last_state(self):
        m = riverswim_model(RiverSwimParams(0.9), 0.99)
        s = riverswim_state(6)
        assert m.transition[s, RIGHT, s] == 1.0

    def test_right_success_probability(self):
        m = riverswim_model(RiverSwimParams(0.5), 0.99)
        s = riverswim_state(2)
        assert m.transition[s, RIGHT, riverswim_state(3)] == 0.5
        assert m.transition[s, RIGHT, s] == 0.5

    def test_left_clamped_at_first_state(self):
        m = riverswim_model(RiverSwimParams(0.5), 0.99)
        assert m.transition[0, LEFT, 0] == 1.0

    def test_rewards(self):
        m = riverswim_model(RiverSwimParams(0.5), 0.99)
        assert m.reward[0, LEFT] == 2.0
        assert m.reward[5, RIGHT] == 10.0
        assert np.count_nonzero(m.reward) == 2

    def test_external_state_range(self):
        with pytest.raises(DomainError):
            riverswim_state(0)
        with pytest.raises(DomainError):
            riverswim_state(7)

    def test_observation(self):
        assert RiverSwimEnvironment.observation(2, LEFT, 1) is None
        assert RiverSwimEnvironment.observation(5, RIGHT, 5) is None
        assert RiverSwimEnvironment.observation(2, RIGHT, 3) == (0, True)
        assert RiverSwimEnvironment.observation(2, RIGHT, 2) == (0, False)


class TestGlucoseReward:
    @pytest.mark.parametrize(
        "gl, expected", [(80.0, -0.02), (70.0, 0.06), (60.0, -6.0), (110.0, -0.5)]
    )
    def test_values(self, gl, expected):
        assert glucose_reward(gl) == pytest.approx(expected, abs=1e-12)

    def test_vectorized(self):
        np.testing.assert_allclose(glucose_reward(np.array([60.0, 110.0])), [-6.0, -0.5], atol=1e-12)


class TestGlucoseDynamics:
    def test_intercept_only(self):
        beta = np.zeros(9)
        beta[0] = 10.0
        p = GlucoseParams(beta=beta, sigma=0.0)
        s = GlucoseState(100.0, 5.0, -3.0, 90.0, 0.0, 0.0, 1)
        nxt, _ = glucose_step(p, s, 1, RngStream(0, 0))
        assert nxt.gl == 10.0

    def test_noise_free_recursion(self):
        p = GlucoseParams(sigma=0.0, p_d=0.0, p_e=0.0)
        s = GlucoseState(120.0, 0.0, 0.0, 110.0, 0.0, 0.0, 0)
        nxt, r = glucose_step(p, s, 1, RngStream(0, 0))
        b = TRUE_BETA
        expected = b[0] + b[1] * 120.0 + b[4] * 110.0 + b[8] * 1
        assert nxt.gl == pytest.approx(expected, abs=1e-12)
        assert (nxt.gl_prev, nxt.a_prev) == (120.0, 1)
        assert r == pytest.approx(glucose_reward(expected))

    def test_design_row_layout(self):
        x = np.arange(7.0)[None, :]
        np.testing.assert_array_equal(design_rows(x, [1]), [[1, 0, 1, 2, 3, 4, 5, 6, 1]])

    def test_initial_states(self):
        x = glucose_initial_states(GlucoseParams(), 500, RngStream(0, 0))
        assert np.all(x[:, 0] == 100.0) and np.all(x[:, 3] == 100.0)
        assert np.all(x[:, 6] == 0)
        # zero-inflated covariates: about 40% exact zeros
        assert abs(np.mean(x[:, 1] == 0.0) - 0.4) < 0.07

    def test_batch_matches_single(self):
        p = GlucoseParams()
        s = GlucoseState(130.0, 2.0, -1.0, 120.0, 0.0, 3.0, 0)
        one, r1 = glucose_step(p, s, 1, RngStream(5, 5))
        many, r2 = glucose_step_batch(p, s.features()[None, :], [1], RngStream(5, 5))
        np.testing.assert_array_equal(one.features(), many[0])
        assert r1 == r2[0]

    def test_bad_action(self):
        with pytest.raises(DomainError):
            glucose_step(GlucoseParams(), GlucoseState(100, 0, 0, 100, 0, 0), 2, RngStream(0, 0))

    def test_beta_length(self):
        with pytest.raises(DomainError):
            GlucoseParams(beta=(1.0, 2.0))
