"""Resilience benchmark: a DQN adversary that learns when to perturb a frozen victim.

The adversary sees the victim's true cart-pole observation and picks one of
two actions, ``0 = no-op`` or ``1 = perturb``.  A perturbation is a targeted
crafted observation (oracle fallback on, so it always lands), the victim then
acts greedily on whatever it observes.  Each step pays the adversary
``-victim_reward - c_adv * attacked``, so its episode return is the negated
victim return minus the perturbation bill.  Regret is ``500 - victim reward``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import cartpole
from .attacks import AttackSpec, craft
from .neural import QNetwork, forward
from .trainer import DQNAgent, TrainerConfig, moving_average

NOOP, PERTURB = 0, 1


@dataclass
class AdversaryConfig:
    max_timesteps: int = 100_000
    gamma: float = 0.99
    learning_rate: float = 1e-3
    buffer_size: int = 50_000
    first_learning_step: int = 1000
    target_update_freq: int = 500
    sampler: str = "prioritized"
    strategy: str = "param_noise"
    exploration_fraction: float = 0.1
    final_epsilon: float = 0.02
    c_adv: float = 1.0
    mode: str = "targeted"
    batch_size: int = 32
    layer_dims: tuple[int, ...] = (4, 64, 64, 2)
    activation: str = "tanh"
    step_size: float = 0.05
    max_iterations: int = 20
    max_linf_radius: float = 0.5
    # append the victim's Q-values to the adversary's observation
    observe_victim_q: bool = False
    stable_window: int = 200
    stable_tolerance: float = 0.05
    stop_when_stable: bool = False

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if self.layer_dims[-1] != 2:
            raise ValueError("the adversary has exactly two actions (no-op, perturb)")
        if self.c_adv < 0:
            raise ValueError("c_adv must be non-negative")

    def trainer_config(self, victim_actions: int = 2) -> TrainerConfig:
        dims = list(self.layer_dims)
        if self.observe_victim_q:
            dims[0] = 4 + victim_actions
        return TrainerConfig(
            total_timesteps=self.max_timesteps, gamma=self.gamma,
            learning_rate=self.learning_rate, buffer_size=self.buffer_size,
            first_learning_step=self.first_learning_step,
            target_update_freq=self.target_update_freq, batch_size=self.batch_size,
            sampler=self.sampler, strategy=self.strategy,
            exploration_fraction=self.exploration_fraction, final_epsilon=self.final_epsilon,
            layer_dims=tuple(dims), activation=self.activation,
        )

    def attack_spec(self) -> AttackSpec:
        return AttackSpec(p_attack=1.0, mode=self.mode, step_size=self.step_size,
                          max_iterations=self.max_iterations,
                          max_linf_radius=self.max_linf_radius,
                          oracle_fallback=True, c_adv=self.c_adv)


@dataclass
class RegretLog:
    victim_reward: list = field(default_factory=list)
    perturbations: list = field(default_factory=list)
    adversary_return: list = field(default_factory=list)
    end_step: list = field(default_factory=list)
    # step at which quasi_stable first held
    stable_step: int | None = None

    @property
    def regret(self) -> np.ndarray:
        return cartpole.MAX_STEPS - np.asarray(self.victim_reward, dtype=np.float64)

    def ma100_regret(self) -> np.ndarray:
        return moving_average(self.regret, 100)

    def ma100_perturbations(self) -> np.ndarray:
        return moving_average(self.perturbations, 100)

    def rows(self) -> list[tuple]:
        """CSV rows: episode, victim_reward, regret, perturbations, ma100s."""
        mr, mp = self.ma100_regret(), self.ma100_perturbations()
        return [(i, self.victim_reward[i], float(self.regret[i]), self.perturbations[i],
                 float(mr[i]), float(mp[i])) for i in range(len(self.victim_reward))]


REGRET_COLUMNS = ("episode", "victim_reward", "regret", "perturbations",
                  "ma100_regret", "ma100_perturbations")


def adversary_step_reward(victim_step_reward: float, attacked: bool, c_adv: float) -> float:
    return -victim_step_reward - c_adv * float(attacked)


def quasi_stable(perturbations, window: int = 200, tolerance: float = 0.05) -> bool:
    """Whether the 100-episode mean perturbation count stayed within ``tolerance``
    (relative to its mean) over the last ``window`` episodes."""
    ma = moving_average(perturbations, 100)
    valid = ma[~np.isnan(ma)]
    if valid.size < window:
        raise ValueError(f"need {window} defined 100-episode means, have {valid.size}")
    tail = valid[-window:]
    spread = tail.max() - tail.min()
    return bool(spread == 0 or spread < tolerance * abs(tail.mean()))


def _quasi_stable_ready(perturbations, window: int, tolerance: float) -> bool:
    return len(perturbations) >= window + 99 and quasi_stable(perturbations, window, tolerance)


def train_adversary(victim: QNetwork, config: AdversaryConfig | None = None, rng=None):
    """Train the adversary against ``victim`` (never modified). Returns ``(adversary_net, RegretLog)``."""
    cfg = config or AdversaryConfig()
    agent = DQNAgent(cfg.trainer_config(victim.n_actions), rng.spawn("adversary"))
    env_rng = rng.spawn("env")
    spec = cfg.attack_spec()
    log = RegretLog()

    def view(obs):
        if cfg.observe_victim_q:
            return np.concatenate([obs, forward(victim, obs)])
        return obs

    state = None
    while agent.t < cfg.max_timesteps:
        if state is None:
            state = cartpole.reset(env_rng)
            agent.begin_episode()
            victim_total, count, adv_total = 0.0, 0, 0.0
        obs = state.observation()
        adv_obs = view(obs)
        choice = agent.act(adv_obs)
        if choice == PERTURB:
            res = craft(spec, victim, obs)
            action = res.induced_action
        else:
            action = int(np.argmax(forward(victim, obs)))
        result = cartpole.step(state, action)
        reward = adversary_step_reward(result.reward, choice == PERTURB, cfg.c_adv)
        victim_total += result.reward
        count += choice == PERTURB
        adv_total += reward
        next_obs = view(result.next_state.observation())
        agent.observe(adv_obs, choice, reward, next_obs, result.terminated and not result.timeout)
        if result.terminated:
            log.victim_reward.append(victim_total)
            log.perturbations.append(count)
            log.adversary_return.append(adv_total)
            log.end_step.append(agent.t)
            state = None
            if log.stable_step is None and _quasi_stable_ready(
                    log.perturbations, cfg.stable_window, cfg.stable_tolerance):
                log.stable_step = agent.t
                if cfg.stop_when_stable:
                    break
        else:
            state = result.next_state
    return agent.online, log
