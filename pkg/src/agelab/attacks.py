"""Observation-perturbation adversary with a per-step attack probability.

Perturbations are crafted by iterated FGSM against the victim's Q-network:
step along the sign of the input gradient that raises the target action's
softmax probability, project back onto an L-infinity ball, and stop once the
victim's greedy action on the perturbed input satisfies the attack mode.
When ``oracle_fallback`` is on, a failed search still counts as a success
and the target action is forced, so the adversary never misses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .neural import QNetwork, forward, input_gradient

MODES = ("state_neutral", "targeted")


@dataclass(frozen=True)
class AttackSpec:
    p_attack: float = 0.0
    mode: str = "state_neutral"
    step_size: float = 0.05
    max_iterations: int = 20
    max_linf_radius: float = 0.5
    oracle_fallback: bool = True
    c_adv: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p_attack <= 1.0:
            raise ValueError(f"p_attack must lie in [0, 1], got {self.p_attack}")
        if self.mode not in MODES:
            raise ValueError(f"unknown attack mode {self.mode!r}")
        if self.step_size <= 0 or self.max_linf_radius <= 0:
            raise ValueError("step_size and max_linf_radius must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class CraftResult:
    perturbed_observation: np.ndarray
    induced_action: int
    success: bool
    used_oracle: bool
    iterations_used: int


def target_action(q_values, mode: str) -> int:
    """Action the adversary tries to induce.

    ``targeted`` picks the worst non-greedy action, ``state_neutral`` the best
    non-greedy one (the cheapest misdirection).  With two actions both name
    the same action.
    """
    q = np.asarray(q_values, dtype=np.float64)
    greedy = int(np.argmax(q))
    masked = q.copy()
    if mode == "targeted":
        masked[greedy] = np.inf
        return int(np.argmin(masked))
    masked[greedy] = -np.inf
    return int(np.argmax(masked))


def mode_satisfied(mode: str, induced: int, greedy: int, target: int) -> bool:
    if mode == "state_neutral":
        return induced != greedy
    return induced == target


def should_attack(spec: AttackSpec, rng) -> bool:
    if spec.p_attack <= 0.0:
        return False
    if spec.p_attack >= 1.0:
        return True
    return rng.random() < spec.p_attack


def craft(spec: AttackSpec, net: QNetwork, true_obs) -> CraftResult:
    x0 = np.asarray(true_obs, dtype=np.float64)
    q0 = forward(net, x0)
    greedy = int(np.argmax(q0))
    target = target_action(q0, spec.mode)
    lo = x0 - spec.max_linf_radius
    hi = x0 + spec.max_linf_radius

    x = x0.copy()
    induced = greedy
    for it in range(1, spec.max_iterations + 1):
        grad = input_gradient(net, x, target)
        x = np.clip(x - spec.step_size * np.sign(grad), lo, hi)
        induced = int(np.argmax(forward(net, x)))
        if mode_satisfied(spec.mode, induced, greedy, target):
            return CraftResult(x, induced, True, False, it)
    if spec.oracle_fallback:
        return CraftResult(x, target, True, True, spec.max_iterations)
    return CraftResult(x, induced, False, False, spec.max_iterations)


def apply_to_step(spec: AttackSpec, net: QNetwork, true_obs, rng):
    """Mediate one observation.

    Returns ``(observed, attacked, forced_action)``; ``forced_action`` is set
    only when the oracle fallback had to force the target action.
    """
    if not should_attack(spec, rng):
        return np.asarray(true_obs, dtype=np.float64), False, None
    result = craft(spec, net, true_obs)
    return result.perturbed_observation, True, (result.induced_action if result.used_oracle else None)
