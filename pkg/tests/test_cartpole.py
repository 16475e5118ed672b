import math

import numpy as np
import pytest

from agelab import cartpole
from agelab.cartpole import EnvState, TerminalStateError
from agelab.rng import SplitMix64


def test_reset_within_initial_range():
    s = cartpole.reset(SplitMix64(0))
    obs = s.observation()
    assert np.all(np.abs(obs) <= 0.05)
    assert s.step_count == 0


def test_reset_deterministic():
    assert cartpole.reset(SplitMix64(5)) == cartpole.reset(SplitMix64(5))


def test_reset_mean_is_centered():
    rng = SplitMix64(1)
    obs = np.array([cartpole.reset(rng).observation() for _ in range(10_000)])
    assert np.all(np.abs(obs.mean(axis=0)) < 0.005)
    assert np.all(np.abs(obs) <= 0.05)


def test_single_push_right_from_rest():
    # one Euler step with g=9.8, m_cart=1, m_pole=0.1, half-length 0.5, F=10, tau=0.02
    res = cartpole.step(EnvState(0.0, 0.0, 0.0, 0.0), 1)
    s = res.next_state
    assert s.cart_position == 0.0 and s.pole_angle == 0.0
    assert s.cart_velocity == pytest.approx(0.19512, abs=1e-5)
    assert s.pole_tip_velocity == pytest.approx(-0.29268, abs=1e-5)
    assert res.reward == 1.0 and not res.terminated


def test_push_left_is_mirror_image():
    right = cartpole.step(EnvState(0.0, 0.0, 0.0, 0.0), 1).next_state
    left = cartpole.step(EnvState(0.0, 0.0, 0.0, 0.0), 0).next_state
    assert left.cart_velocity == -right.cart_velocity
    assert left.pole_tip_velocity == -right.pole_tip_velocity


def test_angle_beyond_twelve_degrees_terminates():
    assert cartpole.is_terminal(EnvState(0.0, 0.0, math.radians(13), 0.0))
    assert not cartpole.is_terminal(EnvState(0.0, 0.0, math.radians(11.9), 0.0))
    # stepping into the region reports termination
    res = cartpole.step(EnvState(0.0, 0.0, math.radians(11.99), 3.0), 1)
    assert res.terminated and not res.timeout


def test_position_beyond_limit_terminates():
    assert cartpole.is_terminal(EnvState(2.41, 0.0, 0.0, 0.0))
    res = cartpole.step(EnvState(2.399, 1.0, 0.0, 0.0), 1)
    assert res.terminated


def test_episode_length_cap():
    assert cartpole.is_terminal(EnvState(0.0, 0.0, 0.0, 0.0, 500))
    res = cartpole.step(EnvState(0.0, 0.0, 0.0, 0.0, 499), 1)
    assert res.terminated and res.timeout
    assert res.next_state.step_count == 500


def test_stepping_terminal_state_raises():
    with pytest.raises(TerminalStateError):
        cartpole.step(EnvState(0.0, 0.0, 0.0, 0.0, 500), 0)
    with pytest.raises(ValueError):
        cartpole.step(EnvState(0.0, 0.0, 0.0, 0.0), 2)


def test_deterministic_step():
    s = EnvState(0.01, -0.2, 0.03, 0.1, 7)
    assert cartpole.step(s, 0) == cartpole.step(s, 0)


def test_upright_pole_without_force_stays_put():
    s = EnvState(0.0, 0.0, 0.0, 0.0)
    for _ in range(100):
        s = cartpole.step(s, 1, force_mag=0.0).next_state
    assert (s.cart_position, s.cart_velocity, s.pole_angle, s.pole_tip_velocity) == (0, 0, 0, 0)


def _balance(obs):
    # a simple stabilizing controller on angle and angular velocity
    return int(obs[2] + 0.5 * obs[3] > 0)


def test_episode_reward_equals_length_and_is_capped():
    rng = SplitMix64(3)
    for policy in (_balance, lambda obs: 0):
        state = cartpole.reset(rng)
        total, length = 0.0, 0
        while True:
            res = cartpole.step(state, policy(state.observation()))
            total += res.reward
            length += 1
            state = res.next_state
            assert state.step_count == length <= 500
            if res.terminated:
                break
        assert total == length
    assert total < 500
    assert cartpole.rollout(_balance, SplitMix64(4)) == cartpole.MAX_EPISODE_REWARD


def test_live_states_stay_inside_observation_bounds():
    rng = SplitMix64(9)
    for _ in range(20):
        state = cartpole.reset(rng)
        while True:
            res = cartpole.step(state, rng.integers(2))
            if res.terminated:
                break
            state = res.next_state
            assert abs(state.cart_position) <= cartpole.OBS_POSITION_BOUND
            assert abs(state.pole_angle) <= cartpole.OBS_ANGLE_BOUND
