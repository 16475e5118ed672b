"""Cart-pole balancing task with the classic Euler-integrated dynamics.

Angles are radians internally; the 12 degree failure angle and the 24 degree
observation bound are converted once here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GRAVITY = 9.8
CART_MASS = 1.0
POLE_MASS = 0.1
TOTAL_MASS = CART_MASS + POLE_MASS
HALF_LENGTH = 0.5
POLEMASS_LENGTH = POLE_MASS * HALF_LENGTH
FORCE_MAG = 10.0
TAU = 0.02

ANGLE_LIMIT = math.radians(12.0)
POSITION_LIMIT = 2.4
MAX_STEPS = 500
MAX_EPISODE_REWARD = 500.0

OBS_POSITION_BOUND = 4.8
OBS_ANGLE_BOUND = math.radians(24.0)

N_ACTIONS = 2
OBS_DIM = 4


class TerminalStateError(RuntimeError):
    """Raised when stepping a state that has already terminated."""


@dataclass(frozen=True, slots=True)
class EnvState:
    cart_position: float
    cart_velocity: float
    pole_angle: float
    pole_tip_velocity: float
    step_count: int = 0

    def observation(self) -> np.ndarray:
        return np.array(
            [self.cart_position, self.cart_velocity, self.pole_angle, self.pole_tip_velocity]
        )


@dataclass(frozen=True, slots=True)
class StepResult:
    next_state: EnvState
    reward: float
    terminated: bool
    # True when the only reason for termination is the episode-length cap.
    timeout: bool = False


def failed(state: EnvState) -> bool:
    return abs(state.pole_angle) > ANGLE_LIMIT or abs(state.cart_position) > POSITION_LIMIT


def is_terminal(state: EnvState) -> bool:
    return failed(state) or state.step_count >= MAX_STEPS


def reset(rng) -> EnvState:
    """Initial state with each component uniform on [-0.05, 0.05]."""
    x, x_dot, theta, theta_dot = (rng.uniform(-0.05, 0.05) for _ in range(4))
    return EnvState(x, x_dot, theta, theta_dot, 0)


def step(state: EnvState, action: int, force_mag: float = FORCE_MAG) -> StepResult:
    """Advance one Euler step of length ``TAU``.

    ``force_mag`` exists so tests can switch the actuator off.
    """
    if action not in (0, 1):
        raise ValueError(f"action must be 0 or 1, got {action!r}")
    if is_terminal(state):
        raise TerminalStateError(f"cannot step terminal state {state}")

    force = force_mag if action == 1 else -force_mag
    theta = state.pole_angle
    theta_dot = state.pole_tip_velocity
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)

    temp = (force + POLEMASS_LENGTH * theta_dot * theta_dot * sin_t) / TOTAL_MASS
    theta_acc = (GRAVITY * sin_t - cos_t * temp) / (
        HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos_t * cos_t / TOTAL_MASS)
    )
    x_acc = temp - POLEMASS_LENGTH * theta_acc * cos_t / TOTAL_MASS

    nxt = EnvState(
        state.cart_position + TAU * state.cart_velocity,
        state.cart_velocity + TAU * x_acc,
        theta + TAU * theta_dot,
        theta_dot + TAU * theta_acc,
        state.step_count + 1,
    )
    fell = failed(nxt)
    capped = nxt.step_count >= MAX_STEPS
    return StepResult(nxt, 1.0, fell or capped, capped and not fell)


def rollout(policy, rng, max_steps: int = MAX_STEPS) -> float:
    """Total reward of one episode where ``policy(observation) -> action``."""
    state = reset(rng)
    total = 0.0
    for _ in range(max_steps):
        result = step(state, policy(state.observation()))
        total += result.reward
        state = result.next_state
        if result.terminated:
            break
    return total
