"""DQN training loop on cart-pole with an optional observation adversary.

:class:`DQNAgent` owns the learning machinery (online/target networks, Adam,
replay memory, exploration); :class:`DQNTrainer` drives it through
cart-pole episodes and, once the attack schedule fires, routes every
observation through :func:`agelab.attacks.apply_to_step`.

Episodes capped at 500 steps are stored as non-terminal transitions so the
bootstrap target is not cut by a time limit the observation cannot see.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import cartpole
from .attacks import AttackSpec, apply_to_step
from .exploration import (
    STRATEGIES,
    ExplorationSchedule,
    ParamNoiseState,
    action_divergence,
    age_select,
    boltzmann_select,
    divergence_threshold,
    eps_greedy_select,
    param_noise_perturb,
)
from .neural import QNetwork, OptimizerState, clone, forward, loss_and_gradients, optimizer_step, soft_copy
from .replay import ReplayBuffer

SAMPLERS = ("uniform", "prioritized")
ATTACK_STARTS = ("immediately", "after_convergence")


class ConfigError(ValueError):
    pass


@dataclass
class TrainerConfig:
    total_timesteps: int = 100_000
    gamma: float = 0.99
    learning_rate: float = 1e-3
    buffer_size: int = 50_000
    first_learning_step: int = 1000
    target_update_freq: int = 500
    batch_size: int = 32
    train_freq: int = 1
    sampler: str = "prioritized"
    strategy: str = "eps_greedy"
    initial_epsilon: float = 1.0
    final_epsilon: float = 0.02
    exploration_fraction: float = 0.1
    # Boltzmann / AGE temperature; None couples it to epsilon
    temperature: float | None = None
    prioritized_alpha: float = 0.6
    prioritized_beta0: float = 0.4
    param_noise_sigma: float = 0.01
    param_noise_update_freq: int = 50
    layer_dims: tuple[int, ...] = (4, 64, 64, 2)
    activation: str = "tanh"
    grad_clip: float | None = 10.0
    # online net picks the bootstrap action, target net scores it
    double_q: bool = False
    attack: AttackSpec | None = None
    attack_start: str = "immediately"
    convergence_threshold: float = 475.0
    convergence_window: int = 100
    # steps run after an after-convergence attack begins; None keeps total_timesteps
    post_attack_timesteps: int | None = None

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        errors = []
        if not 0.0 <= self.gamma < 1.0:
            errors.append(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.sampler not in SAMPLERS:
            errors.append(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")
        if self.strategy not in STRATEGIES:
            errors.append(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.attack_start not in ATTACK_STARTS:
            errors.append(f"attack_start must be one of {ATTACK_STARTS}, got {self.attack_start!r}")
        if self.batch_size < 1 or self.train_freq < 1 or self.target_update_freq < 1:
            errors.append("batch_size, train_freq and target_update_freq must be positive")
        if self.batch_size > self.buffer_size:
            errors.append("batch_size exceeds buffer_size")
        if self.batch_size > max(self.first_learning_step, 1):
            errors.append("batch_size exceeds buffer occupancy at the first learning step")
        if self.temperature is not None and self.temperature <= 0:
            errors.append("temperature must be positive")
        if errors:
            raise ConfigError("; ".join(errors))

    def schedule(self) -> ExplorationSchedule:
        return ExplorationSchedule(self.initial_epsilon, self.final_epsilon,
                                   self.exploration_fraction, self.total_timesteps)


def td_target(reward: float, next_q_max: float, terminal: bool, gamma: float) -> float:
    """``r`` for terminal transitions, else ``r + gamma * max_a Q_target(s', a)``."""
    return reward if terminal else reward + gamma * next_q_max


def td_targets(rewards, next_states, terminals, target_net: QNetwork, gamma: float,
               online_net: QNetwork | None = None) -> np.ndarray:
    """Batched targets; with ``online_net`` the bootstrap is the double-Q estimate
    ``Q_target(s', argmax_a Q_online(s', a))``."""
    q_next = forward(target_net, next_states)
    if online_net is None:
        next_val = q_next.max(axis=1)
    else:
        pick = forward(online_net, next_states).argmax(axis=1)
        next_val = q_next[np.arange(len(pick)), pick]
    return rewards + gamma * next_val * (~np.asarray(terminals, dtype=bool))


class DQNAgent:
    """Online/target Q-networks plus replay and exploration state."""

    def __init__(self, config: TrainerConfig, rng):
        self.config = config
        self.online = QNetwork.initialize(config.layer_dims, rng.spawn("init"), config.activation)
        self.target = clone(self.online)
        self.optimizer = OptimizerState.for_network(self.online, config.learning_rate)
        obs_dim = config.layer_dims[0]
        self.buffer = ReplayBuffer(config.buffer_size, obs_dim,
                                   prioritized=config.sampler == "prioritized",
                                   alpha=config.prioritized_alpha)
        self.schedule = config.schedule()
        self.explore_rng = rng.spawn("explore")
        self.replay_rng = rng.spawn("replay")
        self.noise_rng = rng.spawn("param_noise")
        self.noise = ParamNoiseState(sigma=config.param_noise_sigma)
        self.noisy = None
        self.t = 0
        self.updates = 0
        self.target_syncs = 0

    @property
    def n_actions(self) -> int:
        return self.online.n_actions

    def epsilon(self) -> float:
        return self.schedule.epsilon_at(self.t)

    def begin_episode(self) -> None:
        if self.config.strategy == "param_noise":
            self.noisy = param_noise_perturb(self.online, self.noise, self.noise_rng)

    def act(self, observation) -> int:
        strategy = self.config.strategy
        eps = self.epsilon()
        if strategy == "param_noise":
            if self.noisy is None:
                self.begin_episode()
            return int(np.argmax(forward(self.noisy, observation)))
        q = forward(self.online, observation)
        if strategy == "eps_greedy":
            return eps_greedy_select(q, eps, self.explore_rng)
        temperature = self.config.temperature
        if strategy == "age":
            return age_select(q, eps, self.explore_rng, temperature)
        return boltzmann_select(q, eps if temperature is None else temperature, self.explore_rng)

    def greedy(self, observation) -> int:
        return int(np.argmax(forward(self.online, observation)))

    def observe(self, state, action, reward, next_state, terminal, perturbed=False):
        """Store a transition, advance the clock, and learn when due.

        Returns the training loss, or ``None`` when no update happened.
        """
        cfg = self.config
        self.buffer.add(state, action, reward, next_state, terminal, perturbed)
        self.t += 1
        loss = None
        if self.t >= cfg.first_learning_step and self.t % cfg.train_freq == 0:
            loss = self.learn()
        if self.t > cfg.first_learning_step and self.t % cfg.target_update_freq == 0:
            soft_copy(self.target, self.online)
            self.target_syncs += 1
        if cfg.strategy == "param_noise" and self.t % cfg.param_noise_update_freq == 0:
            self.adapt_noise()
        return loss

    def learn(self) -> float:
        cfg = self.config
        if cfg.sampler == "prioritized":
            frac = min(self.t / cfg.total_timesteps, 1.0)
            beta = cfg.prioritized_beta0 + frac * (1.0 - cfg.prioritized_beta0)
            batch = self.buffer.sample_prioritized(cfg.batch_size, self.replay_rng, beta)
        else:
            batch = self.buffer.sample_uniform(cfg.batch_size, self.replay_rng)
        targets = td_targets(batch.rewards, batch.next_states, batch.terminals, self.target, cfg.gamma,
                             self.online if cfg.double_q else None)
        loss, grads, residual = loss_and_gradients(self.online, batch.states, batch.actions, targets,
                                                   batch.weights, return_residuals=True)
        optimizer_step(self.online, self.optimizer, grads, cfg.grad_clip)
        self.buffer.update_priorities(batch.indices, residual, batch.stamps)
        self.updates += 1
        return loss

    def adapt_noise(self) -> None:
        if len(self.buffer) == 0:
            return
        n = min(len(self.buffer), self.config.batch_size)
        idx = self.noise_rng.integers(len(self.buffer), size=n)
        probe = param_noise_perturb(self.online, self.noise, self.noise_rng)
        self.noise.threshold = divergence_threshold(self.epsilon(), self.n_actions)
        kl = action_divergence(self.online, probe, self.buffer.states[idx])
        if kl < self.noise.threshold:
            self.noise.sigma *= self.noise.adaptation_factor
        else:
            self.noise.sigma /= self.noise.adaptation_factor
        self.last_divergence = kl


@dataclass
class TrainLog:
    """Per-step and per-episode training records."""

    step: list = field(default_factory=list)
    episode: list = field(default_factory=list)
    episode_reward: list = field(default_factory=list)
    epsilon: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    attacked: list = field(default_factory=list)
    # per episode
    ep_index: list = field(default_factory=list)
    ep_end_step: list = field(default_factory=list)
    ep_reward: list = field(default_factory=list)
    ep_length: list = field(default_factory=list)
    ep_attacked: list = field(default_factory=list)
    attack_start_step: int | None = None
    attack_start_push: int | None = None
    convergence_step: int | None = None
    # buffer's count of pre-attack transitions, sampled every 1000 steps after attack start
    residual_pre_attack: list = field(default_factory=list)

    def rewards(self) -> np.ndarray:
        return np.asarray(self.ep_reward, dtype=np.float64)

    def moving_average(self, window: int = 100) -> np.ndarray:
        return moving_average(self.rewards(), window)


def moving_average(values, window: int = 100) -> np.ndarray:
    """Trailing mean over ``window`` entries; NaN until the window is full."""
    x = np.asarray(values, dtype=np.float64)
    out = np.full(x.shape, np.nan)
    if x.size >= window:
        c = np.concatenate([[0.0], np.cumsum(x)])
        out[window - 1:] = (c[window:] - c[:-window]) / window
    return out


def running_mean(values, window: int = 100) -> np.ndarray:
    """Trailing mean over up to ``window`` entries (partial windows at the start)."""
    x = np.asarray(values, dtype=np.float64)
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def convergence_episode(episode_rewards, threshold: float = 475.0, window: int = 100) -> int | None:
    """1-based episode count at which the trailing mean first reaches ``threshold``."""
    ma = moving_average(episode_rewards, window)
    hits = np.flatnonzero(ma >= threshold)
    return int(hits[0]) + 1 if hits.size else None


def detect_convergence(log: TrainLog, threshold: float = 475.0, window: int = 100) -> int | None:
    """Environment step at which the ``window``-episode mean first reaches ``threshold``."""
    ep = convergence_episode(log.ep_reward, threshold, window)
    return None if ep is None else int(log.ep_end_step[ep - 1])


class DQNTrainer:
    """Resumable cart-pole training run.

    Copy an instance (``copy.deepcopy``) to branch several continuations from
    one trained state, e.g. one per attack probability.
    """

    def __init__(self, config: TrainerConfig, rng):
        self.config = config
        self.agent = DQNAgent(config, rng.spawn("agent"))
        self.env_rng = rng.spawn("env")
        self.attack_rng = rng.spawn("attack")
        self.log = TrainLog()
        self.attack_active = False
        self.end_step = config.total_timesteps
        if config.attack is not None and config.attack_start == "immediately":
            self._start_attack()
        self._state = None
        self._observed = None
        self._forced = None
        self._attacked = False
        self._ep_reward = 0.0
        self._ep_attacks = 0

    @property
    def t(self) -> int:
        return self.agent.t

    def set_attack(self, spec: AttackSpec | None, start_now: bool = True,
                   horizon: int | None = None) -> None:
        """Replace the attack spec; with ``start_now`` it takes effect on the next observation.

        ``horizon`` resets the end of the run to that many steps from now.
        """
        self.config.attack = spec
        self.attack_active = False
        if spec is not None and start_now:
            self._start_attack()
        if horizon is not None:
            self.end_step = self.agent.t + horizon

    def _start_attack(self) -> None:
        self.attack_active = True
        self.log.attack_start_step = self.agent.t
        self.log.attack_start_push = self.agent.buffer.push_count
        if self.config.post_attack_timesteps is not None and self.config.attack_start == "after_convergence":
            self.end_step = self.agent.t + self.config.post_attack_timesteps

    def _mediate(self, true_obs):
        if self.attack_active and self.config.attack is not None:
            return apply_to_step(self.config.attack, self.agent.online, true_obs, self.attack_rng)
        return true_obs, False, None

    def _begin_episode(self) -> None:
        self._state = cartpole.reset(self.env_rng)
        self._observed, self._attacked, self._forced = self._mediate(self._state.observation())
        self._ep_reward = 0.0
        self._ep_attacks = 0
        self.agent.begin_episode()

    def run(self, max_steps: int | None = None, stop_at_convergence: bool = False) -> TrainLog:
        """Train until the configured end (or ``max_steps`` more steps).

        With ``stop_at_convergence`` the call also returns right after the
        episode on which convergence is first detected.
        """
        cfg = self.config
        agent = self.agent
        log = self.log
        limit = None if max_steps is None else agent.t + max_steps
        while agent.t < (self.end_step if limit is None else min(self.end_step, limit)):
            if self._state is None:
                self._begin_episode()
            observed, attacked, forced = self._observed, self._attacked, self._forced
            action = forced if forced is not None else agent.act(observed)
            result = cartpole.step(self._state, action)
            self._ep_reward += result.reward
            self._ep_attacks += attacked
            if result.terminated:
                next_observed, next_attacked, next_forced = result.next_state.observation(), False, None
            else:
                next_observed, next_attacked, next_forced = self._mediate(result.next_state.observation())
            eps = agent.epsilon()
            loss = agent.observe(observed, action, result.reward, next_observed,
                                 result.terminated and not result.timeout, attacked)
            log.step.append(agent.t)
            log.episode.append(len(log.ep_reward))
            log.episode_reward.append(self._ep_reward)
            log.epsilon.append(eps)
            log.loss.append(math.nan if loss is None else loss)
            log.attacked.append(bool(attacked))
            if self.attack_active and log.attack_start_push is not None and agent.t % 1000 == 0:
                log.residual_pre_attack.append(
                    (agent.t, agent.buffer.count_pushed_before(log.attack_start_push)))

            if result.terminated:
                was_converged = log.convergence_step is not None
                self._end_episode(result.next_state.step_count)
                if stop_at_convergence and not was_converged and log.convergence_step is not None:
                    break
            else:
                self._state = result.next_state
                self._observed, self._attacked, self._forced = next_observed, next_attacked, next_forced
        return log

    def _end_episode(self, length: int) -> None:
        cfg = self.config
        log = self.log
        log.ep_index.append(len(log.ep_reward))
        log.ep_end_step.append(self.agent.t)
        log.ep_reward.append(self._ep_reward)
        log.ep_length.append(length)
        log.ep_attacked.append(self._ep_attacks)
        self._state = None
        if log.convergence_step is None:
            n = len(log.ep_reward)
            if n >= cfg.convergence_window:
                mean = sum(log.ep_reward[-cfg.convergence_window:]) / cfg.convergence_window
                if mean >= cfg.convergence_threshold:
                    log.convergence_step = self.agent.t
                    if cfg.attack is not None and cfg.attack_start == "after_convergence" and not self.attack_active:
                        self._start_attack()


def train(config: TrainerConfig, rng) -> tuple[QNetwork, TrainLog]:
    trainer = DQNTrainer(config, rng)
    log = trainer.run()
    return trainer.agent.online, log


def evaluate(net: QNetwork, episodes: int, rng) -> tuple[float, float]:
    """Mean and standard deviation of greedy episode reward (no exploration, no attack)."""
    if episodes < 1:
        raise ValueError("episodes must be at least 1")

    def policy(obs):
        return int(np.argmax(forward(net, obs)))

    totals = np.array([cartpole.rollout(policy, rng) for _ in range(episodes)])
    return float(totals.mean()), float(totals.std())
