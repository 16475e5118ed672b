"""Exact, enumerable-state version of the attacked-replay analysis.

Experiences starting at state ``s`` come in two kinds.  A nominal experience
records the agent's action ``a`` and the successor that action produced.  An
adversarial experience records the same ``s`` and ``a`` (what the agent
believed it was doing) but the successor of the action the adversary
induced.  Under uniform replay the expected TD error of ``(s, a)`` is then

    p_attack(s) * [r(s, a, s'_adv) + gamma V(s'_adv)]
      + (p(s) - p_attack(s)) * [r(s, a, s'_nom) + gamma V(s'_nom)] - V(s)

and the bias from the adversarial term shrinks only while the nominal share
``p(s) - p_attack(s)`` grows.  With a stationary attack rate the learned
ranking of the greedy action against the adversary's replacement flips once
the attacked share exceeds the nominal share, i.e. at ``p_attack = 0.5``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import SplitMix64


@dataclass
class ToyMdp:
    """Finite MDP with kernel ``transitions[s, a, s']`` and rewards ``rewards[s, a, s']``."""

    name: str
    transitions: np.ndarray
    rewards: np.ndarray
    gamma: float
    terminal: np.ndarray
    start: np.ndarray

    def __post_init__(self):
        self.transitions = np.asarray(self.transitions, dtype=np.float64)
        self.rewards = np.broadcast_to(np.asarray(self.rewards, dtype=np.float64),
                                       self.transitions.shape).copy()
        self.terminal = np.asarray(self.terminal, dtype=bool)
        self.start = np.asarray(self.start, dtype=np.float64)
        s, a, s2 = self.transitions.shape
        if s != s2:
            raise ValueError("transition kernel must be S x A x S")
        if not np.allclose(self.transitions.sum(axis=2), 1.0, atol=1e-12, rtol=0):
            raise ValueError("transition rows must sum to 1")
        if self.terminal.shape != (s,) or self.start.shape != (s,):
            raise ValueError("terminal and start must have one entry per state")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]


def chain_mdp(n_states: int = 5, gamma: float = 0.9) -> ToyMdp:
    """Deterministic chain; action 1 moves right, action 0 left (bounded at 0).

    Reaching the right end pays 1 and ends the episode.
    """
    T = np.zeros((n_states, 2, n_states))
    R = np.zeros((n_states, 2, n_states))
    goal = n_states - 1
    for s in range(n_states):
        if s == goal:
            T[s, :, s] = 1.0
            continue
        T[s, 0, max(s - 1, 0)] = 1.0
        T[s, 1, s + 1] = 1.0
    R[:, :, goal] = 1.0
    R[goal] = 0.0
    terminal = np.zeros(n_states, dtype=bool)
    terminal[goal] = True
    start = (~terminal).astype(float) / (n_states - 1)
    return ToyMdp(f"chain{n_states}", T, R, gamma, terminal, start)


GRID_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right


def gridworld_mdp(size: int = 5, goal=(4, 4), pit=(2, 2), gamma: float = 0.9,
                  goal_reward: float = 1.0, pit_reward: float = -1.0) -> ToyMdp:
    """Deterministic grid with walls at the border, a rewarding goal and a penalizing pit."""
    n = size * size
    T = np.zeros((n, 4, n))
    R = np.zeros((n, 4, n))
    terminal = np.zeros(n, dtype=bool)
    g = goal[0] * size + goal[1]
    p = pit[0] * size + pit[1]
    terminal[[g, p]] = True
    for r in range(size):
        for c in range(size):
            s = r * size + c
            for a, (dr, dc) in enumerate(GRID_MOVES):
                if terminal[s]:
                    T[s, a, s] = 1.0
                    continue
                nr = min(max(r + dr, 0), size - 1)
                nc = min(max(c + dc, 0), size - 1)
                s2 = nr * size + nc
                T[s, a, s2] = 1.0
                if s2 == g:
                    R[s, a, s2] = goal_reward
                elif s2 == p:
                    R[s, a, s2] = pit_reward
    start = (~terminal).astype(float) / np.count_nonzero(~terminal)
    return ToyMdp(f"grid{size}x{size}", T, R, gamma, terminal, start)


# -- exact solutions ------------------------------------------------------


def q_from_values(mdp: ToyMdp, values) -> np.ndarray:
    v = np.where(mdp.terminal, 0.0, np.asarray(values, dtype=np.float64))
    q = np.einsum("ijk,ijk->ij", mdp.transitions, mdp.rewards + mdp.gamma * v[None, None, :])
    q[mdp.terminal] = 0.0
    return q


def value_iteration(mdp: ToyMdp, tol: float = 1e-12, max_iter: int = 100_000):
    """Optimal ``(V, Q)`` by Bellman backups until the sup-norm change is below ``tol``."""
    v = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        q = q_from_values(mdp, v)
        v_new = q.max(axis=1)
        if np.max(np.abs(v_new - v)) < tol:
            v = v_new
            break
        v = v_new
    return v, q_from_values(mdp, v)


def policy_evaluation(mdp: ToyMdp, policy) -> np.ndarray:
    """Exact values of a deterministic policy by solving the linear system."""
    n = mdp.n_states
    idx = np.arange(n)
    P = mdp.transitions[idx, policy]
    r = np.einsum("ik,ik->i", P, mdp.rewards[idx, policy])
    live = ~mdp.terminal
    P = P * live[:, None] * live[None, :]
    r = r * live
    return np.linalg.solve(np.eye(n) - mdp.gamma * P, r)


def policy_iteration(mdp: ToyMdp, max_iter: int = 1000):
    policy = np.zeros(mdp.n_states, dtype=np.int64)
    for _ in range(max_iter):
        v = policy_evaluation(mdp, policy)
        q = q_from_values(mdp, v)
        best = q.max(axis=1)
        # keep the current action unless another is strictly better
        keep = q[np.arange(mdp.n_states), policy] >= best - 1e-12
        new = np.where(keep, policy, np.argmax(q, axis=1))
        if np.array_equal(new, policy):
            return policy, v
        policy = new
    raise RuntimeError("policy iteration did not converge")


def optimal_action_sets(q: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Boolean mask of actions within ``tol`` of the best in each state."""
    return q >= q.max(axis=1, keepdims=True) - tol


def greedy_is_optimal(q_table: np.ndarray, optimal_mask: np.ndarray, terminal: np.ndarray) -> bool:
    greedy = np.argmax(q_table, axis=1)
    live = np.flatnonzero(~terminal)
    return bool(np.all(optimal_mask[live, greedy[live]]))


# -- sampling profiles and the expected TD error ----------------------------


@dataclass
class SamplingProfile:
    """Per-state probabilities of drawing an experience that starts at ``s``.

    ``p_s[s]`` counts nominal and crafted experiences alike;
    ``p_attack_given_s[s]`` only the crafted ones.
    """

    p_s: np.ndarray
    p_attack_given_s: np.ndarray

    def __post_init__(self):
        self.p_s = np.asarray(self.p_s, dtype=np.float64)
        self.p_attack_given_s = np.asarray(self.p_attack_given_s, dtype=np.float64)
        if self.p_s.shape != self.p_attack_given_s.shape:
            raise ValueError("profile arrays differ in shape")
        if abs(self.p_s.sum() - 1.0) > 1e-9:
            raise ValueError("p_s must sum to 1")
        if np.any(self.p_attack_given_s < 0) or np.any(self.p_attack_given_s > self.p_s + 1e-15):
            raise ValueError("need 0 <= p_attack_given_s <= p_s")

    @property
    def p_nominal(self) -> np.ndarray:
        return self.p_s - self.p_attack_given_s

    @classmethod
    def from_transitions(cls, states, perturbed, n_states: int) -> "SamplingProfile":
        """Empirical profile of a replay buffer under uniform sampling."""
        states = np.asarray(states, dtype=np.int64)
        perturbed = np.asarray(perturbed, dtype=bool)
        n = states.size
        p_s = np.bincount(states, minlength=n_states) / n
        p_att = np.bincount(states[perturbed], minlength=n_states) / n
        return cls(p_s, p_att)


def expected_td_error(profile: SamplingProfile, mdp: ToyMdp, values, s: int, a: int,
                      nominal_next: int, attacked_next: int) -> float:
    """Expected TD error of ``(s, a)`` with fixed nominal and adversarial successors."""
    n = mdp.n_states
    for idx in (s, nominal_next, attacked_next):
        if not 0 <= idx < n:
            raise IndexError(f"state index {idx} out of range")
    v = np.asarray(values, dtype=np.float64)
    p_att = profile.p_attack_given_s[s]
    p_s = profile.p_s[s]
    attacked = mdp.rewards[s, a, attacked_next] + mdp.gamma * v[attacked_next]
    nominal = mdp.rewards[s, a, nominal_next] + mdp.gamma * v[nominal_next]
    return float(p_att * attacked + (p_s - p_att) * nominal - v[s])


def expected_td_error_kernel(profile: SamplingProfile, mdp: ToyMdp, values, s: int, a: int,
                             adversary_action: int) -> float:
    """Expectation of :func:`expected_td_error` over the kernel's successors.

    Nominal successors follow ``a``; adversarial ones follow ``adversary_action``,
    while the reward is still booked against the recorded action.
    """
    v = np.asarray(values, dtype=np.float64)
    backup = mdp.rewards[s, a] + mdp.gamma * v
    nominal = mdp.transitions[s, a] @ backup
    attacked = mdp.transitions[s, adversary_action] @ backup
    p_att = profile.p_attack_given_s[s]
    return float(p_att * attacked + profile.p_nominal[s] * nominal - v[s])


def bias_decrease_holds(profile_i: SamplingProfile, profile_next: SamplingProfile, s: int) -> bool:
    """Whether the nominal share of experiences starting at ``s`` strictly grew."""
    nxt = profile_next.p_s[s] - profile_next.p_attack_given_s[s]
    cur = profile_i.p_s[s] - profile_i.p_attack_given_s[s]
    return bool(nxt > cur)


def uniform_threshold_holds(p_attack: float) -> bool:
    """Stationary uniform-replay condition: nominal share must exceed the attack share."""
    if not 0.0 <= p_attack <= 1.0:
        raise ValueError("p_attack must lie in [0, 1]")
    return p_attack < 0.5


# -- attacked tabular Q-learning -------------------------------------------


def redirect_action(q_row, intended: int, mode: str) -> int:
    """Action an always-successful adversary substitutes for ``intended``.

    ``state_neutral`` picks the best-ranked other action, ``targeted`` the
    worst-ranked; ties go to the lowest index.
    """
    best, best_v = -1, 0.0
    for b, v in enumerate(q_row):
        if b == intended:
            continue
        if best < 0 or (v > best_v if mode == "state_neutral" else v < best_v):
            best, best_v = b, v
    return best


@dataclass
class TabularConfig:
    episodes: int = 2000
    # uniform behaviour policy; Q-learning is off-policy so the greedy policy is still learned
    epsilon: float = 1.0
    learning_rate: float = 0.1
    # "visit": alpha = learning_rate * visit_scale / (visit_scale + n(s, a))
    lr_decay: str | None = "visit"
    visit_scale: float = 50.0
    buffer_size: int = 5000
    replay_updates: int = 1
    max_episode_steps: int = 100
    check_fraction: float = 0.2


@dataclass
class TabularResult:
    converged: bool
    episodes_to_converge: int | None
    q_table: np.ndarray
    policy: np.ndarray
    policy_value: np.ndarray
    optimal_checks: np.ndarray
    perturbed_fraction: float
    profiles: list = field(default_factory=list)


def tabular_attack_experiment(mdp: ToyMdp, p_attack, mode: str = "state_neutral",
                              episodes: int | None = None, rng=None,
                              config: TabularConfig | None = None,
                              snapshot_every: int | None = None) -> TabularResult:
    """Q-learning from a uniformly replayed buffer under a per-step attack rate.

    ``p_attack`` may be a float or a callable ``episode -> probability``.
    Convergence means the greedy policy is optimal (per value iteration) at
    the end of every episode in the final ``check_fraction`` of the run.
    """
    cfg = config or TabularConfig()
    episodes = cfg.episodes if episodes is None else episodes
    rng = rng if rng is not None else SplitMix64(0)
    _, q_star = value_iteration(mdp)
    optimal = optimal_action_sets(q_star)

    S, A = mdp.n_states, mdp.n_actions
    gamma = mdp.gamma
    T = mdp.transitions
    cum_T = np.cumsum(T, axis=2).tolist()
    R = mdp.rewards.tolist()
    terminal = mdp.terminal.tolist()
    start_cum = np.cumsum(mdp.start).tolist()
    Q = [[0.0] * A for _ in range(S)]
    visits = [[0] * A for _ in range(S)]

    cap = cfg.buffer_size
    buf_s = [0] * cap
    buf_a = [0] * cap
    buf_r = [0.0] * cap
    buf_s2 = [0] * cap
    buf_term = [False] * cap
    buf_pert = [False] * cap
    size = 0
    cursor = 0

    def draw(cum):
        u = rng.random()
        for i, c in enumerate(cum):
            if u < c:
                return i
        return len(cum) - 1

    def greedy(row):
        best, best_v = 0, row[0]
        for b in range(1, A):
            if row[b] > best_v:
                best, best_v = b, row[b]
        return best

    checks = np.zeros(episodes, dtype=bool)
    profiles = []
    alpha0 = cfg.learning_rate
    decay = cfg.lr_decay == "visit"
    k = cfg.visit_scale
    for ep in range(episodes):
        p = p_attack(ep) if callable(p_attack) else p_attack
        s = draw(start_cum)
        for _ in range(cfg.max_episode_steps):
            row = Q[s]
            if rng.random() < cfg.epsilon:
                a = rng.integers(A)
            else:
                a = greedy(row)
            attacked = p > 0.0 and rng.random() < p
            executed = redirect_action(row, a, mode) if attacked else a
            s2 = draw(cum_T[s][executed])
            r = R[s][executed][s2]
            buf_s[cursor], buf_a[cursor], buf_r[cursor] = s, a, r
            buf_s2[cursor], buf_term[cursor], buf_pert[cursor] = s2, terminal[s2], attacked
            cursor = (cursor + 1) % cap
            size = min(size + 1, cap)

            for _ in range(cfg.replay_updates):
                j = rng.integers(size)
                bs, ba = buf_s[j], buf_a[j]
                target = buf_r[j]
                if not buf_term[j]:
                    target += gamma * max(Q[buf_s2[j]])
                if decay:
                    visits[bs][ba] += 1
                    alpha = alpha0 * k / (k + visits[bs][ba])
                else:
                    alpha = alpha0
                Q[bs][ba] += alpha * (target - Q[bs][ba])
            s = s2
            if terminal[s]:
                break
        q_arr = np.array(Q)
        checks[ep] = greedy_is_optimal(q_arr, optimal, mdp.terminal)
        if snapshot_every and (ep + 1) % snapshot_every == 0:
            profiles.append(SamplingProfile.from_transitions(buf_s[:size], buf_pert[:size], S))

    tail = max(1, int(round(cfg.check_fraction * episodes)))
    converged = bool(np.all(checks[-tail:]))
    failing = np.flatnonzero(~checks)
    if failing.size == 0:
        first = 0
    elif failing[-1] + 1 < episodes:
        first = int(failing[-1]) + 1
    else:
        first = None
    q_arr = np.array(Q)
    policy = np.argmax(q_arr, axis=1)
    return TabularResult(
        converged=converged,
        episodes_to_converge=first if converged else None,
        q_table=q_arr,
        policy=policy,
        policy_value=policy_evaluation(mdp, policy),
        optimal_checks=checks,
        perturbed_fraction=sum(buf_pert[:size]) / max(size, 1),
        profiles=profiles,
    )


SWEEP_COLUMNS = ("mdp", "p_attack", "seed", "mode", "converged", "episodes_to_converge")


def threshold_sweep(mdps, p_values, seeds, mode: str = "state_neutral",
                    config: TabularConfig | None = None) -> list[dict]:
    """Run the attacked experiment on every (mdp, p_attack, seed) cell."""
    rows = []
    for mdp in mdps:
        for p in p_values:
            for seed in seeds:
                rng = SplitMix64(seed).spawn(f"tabular/{mdp.name}/{mode}/{p:.6f}")
                res = tabular_attack_experiment(mdp, p, mode, rng=rng, config=config)
                rows.append({
                    "mdp": mdp.name,
                    "p_attack": p,
                    "seed": seed,
                    "mode": mode,
                    "converged": res.converged,
                    "episodes_to_converge": res.episodes_to_converge,
                })
    return rows


def convergence_rates(rows) -> dict:
    """Fraction of converged seeds per (mdp, p_attack)."""
    out: dict = {}
    for row in rows:
        key = (row["mdp"], row["p_attack"])
        hit, n = out.get(key, (0, 0))
        out[key] = (hit + bool(row["converged"]), n + 1)
    return {k: hit / n for k, (hit, n) in out.items()}
