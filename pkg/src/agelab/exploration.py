"""Action-selection strategies: decaying epsilon-greedy, Boltzmann,
parameter-space noise, and adversarially-guided exploration (AGE).

AGE explores with probability epsilon like epsilon-greedy, but instead of a
uniform action it samples from a Boltzmann distribution over each action's
adversarial gain ``max_a' Q(s, a') - Q(s, a)`` at temperature epsilon.  The
exploratory branch therefore favours the actions an adversary would try to
induce, and the whole rule becomes greedy as epsilon decays.

Ties in argmax/argmin resolve to the lowest action index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .neural import QNetwork, clone, forward, softmax

STRATEGIES = ("eps_greedy", "boltzmann", "param_noise", "age")


@dataclass(frozen=True)
class ExplorationSchedule:
    """Linear decay from ``initial_epsilon`` to ``final_epsilon`` over the
    first ``exploration_fraction * total_timesteps`` steps."""

    initial_epsilon: float = 1.0
    final_epsilon: float = 0.02
    exploration_fraction: float = 0.1
    total_timesteps: int = 100_000

    @property
    def decay_steps(self) -> float:
        return self.exploration_fraction * self.total_timesteps

    def epsilon_at(self, step: int) -> float:
        if step < 0:
            raise ValueError("step must be non-negative")
        if self.decay_steps <= 0:
            return self.final_epsilon
        if step >= self.decay_steps:
            return self.final_epsilon
        frac = step / self.decay_steps
        return self.initial_epsilon + frac * (self.final_epsilon - self.initial_epsilon)


def epsilon_at(schedule: ExplorationSchedule, step: int) -> float:
    return schedule.epsilon_at(step)


def zeta_adv(q_values, epsilon: float) -> np.ndarray:
    """Boltzmann distribution over adversarial gains at temperature ``epsilon``.

    ``zeta(a) = exp(g_a / eps) / sum_b exp(g_b / eps)`` with
    ``g_a = max Q - Q(a)``; the largest gain is subtracted before
    exponentiating, which leaves the ratio unchanged.
    """
    if not epsilon > 0:
        raise ValueError(f"temperature must be positive, got {epsilon}")
    q = np.asarray(q_values, dtype=np.float64)
    if not np.all(np.isfinite(q)):
        raise ValueError("q_values must be finite")
    gains = q.max() - q
    e = np.exp((gains - gains.max()) / epsilon)
    return e / e.sum()


def age_select(q_values, epsilon: float, rng, temperature: float | None = None) -> int:
    """With probability ``epsilon`` sample from ``zeta_adv``; otherwise act greedily.

    ``temperature`` decouples the Boltzmann temperature from the exploration
    probability; by default both are ``epsilon``.
    """
    q = np.asarray(q_values, dtype=np.float64)
    if rng.random() <= epsilon:
        return rng.categorical(zeta_adv(q, epsilon if temperature is None else temperature))
    return int(np.argmax(q))


def age_probabilities(q_values, epsilon: float, temperature: float | None = None) -> np.ndarray:
    """Exact action distribution induced by ``age_select``."""
    q = np.asarray(q_values, dtype=np.float64)
    probs = epsilon * zeta_adv(q, epsilon if temperature is None else temperature)
    probs[int(np.argmax(q))] += 1.0 - epsilon
    return probs


def eps_greedy_select(q_values, epsilon: float, rng) -> int:
    q = np.asarray(q_values)
    if rng.random() < epsilon:
        return rng.integers(q.shape[0])
    return int(np.argmax(q))


def boltzmann_probabilities(q_values, temperature: float) -> np.ndarray:
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    return softmax(np.asarray(q_values, dtype=np.float64) / temperature)


def boltzmann_select(q_values, temperature: float, rng) -> int:
    return rng.categorical(boltzmann_probabilities(q_values, temperature))


# -- parameter-space noise ------------------------------------------------


@dataclass
class ParamNoiseState:
    sigma: float = 0.01
    threshold: float = 0.1
    adaptation_factor: float = 1.01

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


def param_noise_perturb(net: QNetwork, noise_state: ParamNoiseState, rng) -> QNetwork:
    """Copy of ``net`` with i.i.d. Gaussian noise of std ``sigma`` on every parameter."""
    noisy = clone(net)
    if noise_state.sigma == 0:
        return noisy
    noisy.flat += rng.normal(0.0, noise_state.sigma, size=noisy.flat.size)
    return noisy


def param_noise_adapt(noise_state: ParamNoiseState, action_divergence: float) -> ParamNoiseState:
    """Grow sigma while the noisy policy stays close to the clean one, shrink it otherwise."""
    if action_divergence < noise_state.threshold:
        noise_state.sigma *= noise_state.adaptation_factor
    else:
        noise_state.sigma /= noise_state.adaptation_factor
    return noise_state


def action_divergence(clean: QNetwork, noisy: QNetwork, observations) -> float:
    """Mean KL(softmax(Q_clean) || softmax(Q_noisy)) over a batch of observations."""
    p = softmax(forward(clean, observations))
    q = softmax(forward(noisy, observations))
    kl = np.sum(p * (np.log(p + 1e-300) - np.log(q + 1e-300)), axis=-1)
    return float(np.mean(kl))


def divergence_threshold(epsilon: float, n_actions: int) -> float:
    """KL an epsilon-greedy policy would sit at: ``-log(1 - eps + eps / |A|)``."""
    return float(-np.log(1.0 - epsilon + epsilon / n_actions))
