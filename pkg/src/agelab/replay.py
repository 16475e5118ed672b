"""Ring-buffer experience memory with uniform and prioritized sampling.

Each stored transition carries a ``perturbed`` flag separating nominal
experience (the agent saw the true state) from adversarial experience (the
stored state is a crafted observation), plus a push sequence number used to
count how much pre-attack data is still resident.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

PRIORITY_FLOOR = 1e-6


@dataclass(frozen=True)
class Experience:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool
    perturbed: bool = False


class Batch(NamedTuple):
    indices: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray
    perturbed: np.ndarray
    weights: np.ndarray
    stamps: np.ndarray

    def experiences(self) -> list[Experience]:
        return [
            Experience(self.states[k], int(self.actions[k]), float(self.rewards[k]),
                       self.next_states[k], bool(self.terminals[k]), bool(self.perturbed[k]))
            for k in range(len(self.indices))
        ]


class SumTree:
    """Tree of partial sums over ``capacity`` leaves with fan-out ``branching``.

    Level 0 holds the leaves (zero-padded to a power of ``branching``) and
    each higher level sums blocks of ``branching`` nodes, ending in a single
    root.  A wide fan-out keeps the tree shallow (depth 4 for 50000 leaves at
    the default of 32), so batched descents cost a handful of numpy calls.
    Parents are recomputed from their children rather than adjusted by
    deltas, so the root never drifts from the leaf sum.
    """

    def __init__(self, capacity: int, branching: int = 32):
        if branching < 2:
            raise ValueError("branching must be at least 2")
        self.capacity = int(capacity)
        self.branching = branching
        width = branching
        while width < self.capacity:
            width *= branching
        self.levels = []
        while width >= 1:
            self.levels.append(np.zeros(width))
            if width == 1:
                break
            width //= branching

    @property
    def total(self) -> float:
        return float(self.levels[-1][0])

    def leaves(self) -> np.ndarray:
        return self.levels[0][: self.capacity]

    def __getitem__(self, idx):
        return self.levels[0][idx]

    def update(self, indices, values) -> None:
        k = self.branching
        if np.isscalar(indices):
            node = int(indices)
            self.levels[0][node] = values
            for lower, upper in zip(self.levels[:-1], self.levels[1:]):
                node //= k
                upper[node] = lower[node * k:(node + 1) * k].sum()
            return
        nodes = np.asarray(indices, dtype=np.int64).reshape(-1)
        # for duplicated indices the last value wins, as with sequential writes
        self.levels[0][nodes] = np.asarray(values, dtype=np.float64).reshape(-1)
        for lower, upper in zip(self.levels[:-1], self.levels[1:]):
            nodes = nodes // k
            # duplicate parents just rewrite the same sum
            upper[nodes] = lower.reshape(-1, k)[nodes].sum(axis=1)

    def find(self, values) -> np.ndarray:
        """Leaf index whose prefix-sum interval contains each value."""
        k = self.branching
        v = np.array(values, dtype=np.float64, copy=True).reshape(-1)
        node = np.zeros(v.shape, dtype=np.int64)
        last = k - 1
        for lower in reversed(self.levels[:-1]):
            cums = np.cumsum(lower.reshape(-1, k)[node], axis=1)
            child = np.minimum((cums <= v[:, None]).sum(axis=1), last)
            before = np.where(child > 0, cums[np.arange(v.size), child - 1], 0.0)
            v -= before
            node = node * k + child
        return node


class ReplayBuffer:
    """FIFO experience memory of fixed capacity.

    With ``prioritized=True`` a sum tree over ``priority ** alpha`` is kept in
    step with the ring; new transitions enter at the current maximum priority.
    """

    def __init__(self, capacity: int = 50_000, obs_dim: int = 4, prioritized: bool = False,
                 alpha: float = 0.6):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.prioritized = prioritized
        self.alpha = alpha
        self.states = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, obs_dim))
        self.terminals = np.zeros(capacity, dtype=bool)
        self.perturbed = np.zeros(capacity, dtype=bool)
        self.stamps = np.full(capacity, -1, dtype=np.int64)
        self.cursor = 0
        self.size = 0
        self.push_count = 0
        self.stale_updates = 0
        self.max_priority = 1.0
        self.tree = SumTree(capacity) if prioritized else None

    def __len__(self) -> int:
        return self.size

    def __getitem__(self, i: int) -> Experience:
        if not 0 <= i < self.size:
            raise IndexError(i)
        return Experience(self.states[i].copy(), int(self.actions[i]), float(self.rewards[i]),
                          self.next_states[i].copy(), bool(self.terminals[i]),
                          bool(self.perturbed[i]))

    def push(self, experience: Experience) -> int:
        return self.add(experience.state, experience.action, experience.reward,
                        experience.next_state, experience.terminal, experience.perturbed)

    def add(self, state, action, reward, next_state, terminal, perturbed=False) -> int:
        """Store one transition; returns the slot it was written to."""
        i = self.cursor
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.terminals[i] = terminal
        self.perturbed[i] = perturbed
        self.stamps[i] = self.push_count
        if self.tree is not None:
            # a fresh buffer starts with max_priority = 1.0
            self.tree.update(i, self.max_priority**self.alpha)
        self.push_count += 1
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return i

    def _gather(self, idx: np.ndarray, weights: np.ndarray) -> Batch:
        return Batch(idx, self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.terminals[idx], self.perturbed[idx],
                     weights, self.stamps[idx])

    def sample_uniform(self, batch_size: int, rng) -> Batch:
        """Indices drawn uniformly with replacement."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(self.size, size=batch_size)
        return self._gather(idx, np.ones(batch_size))

    def sample_prioritized(self, batch_size: int, rng, beta: float = 0.4) -> Batch:
        """Draw ``P(i) ~ priority_i ** alpha``; weights ``(N P(i)) ** -beta`` scaled by the batch max."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        if self.tree is None:
            raise ValueError("buffer was built without prioritized=True")
        total = self.tree.total
        idx = self.tree.find(rng.random(batch_size) * total)
        # rounding can walk past the last occupied leaf
        idx = np.minimum(idx, self.size - 1)
        probs = self.tree[idx] / total
        weights = (self.size * probs) ** (-beta)
        weights /= weights.max()
        return self._gather(idx, weights)

    def update_priorities(self, indices, td_errors, stamps=None) -> None:
        """Set ``priority = |td_error| + 1e-6``.

        When ``stamps`` (from the sampled batch) are given, slots overwritten
        since sampling are skipped and tallied in ``stale_updates``.
        """
        if self.tree is None:
            return
        indices = np.asarray(indices, dtype=np.int64)
        priorities = np.abs(np.asarray(td_errors, dtype=np.float64)) + PRIORITY_FLOOR
        if stamps is not None:
            fresh = self.stamps[indices] == np.asarray(stamps)
            self.stale_updates += int(np.count_nonzero(~fresh))
            indices, priorities = indices[fresh], priorities[fresh]
        if indices.size == 0:
            return
        self.tree.update(indices, priorities**self.alpha)
        self.max_priority = max(self.max_priority, float(priorities.max()))

    def priorities(self) -> np.ndarray:
        """Raw priorities of occupied slots (before the alpha exponent)."""
        if self.tree is None:
            return np.ones(self.size)
        return self.tree.leaves()[: self.size] ** (1.0 / self.alpha)

    def composition(self) -> tuple[float, float]:
        """Fractions of (nominal, perturbed) transitions currently stored."""
        if self.size == 0:
            return 0.0, 0.0
        frac = float(np.count_nonzero(self.perturbed[: self.size])) / self.size
        return 1.0 - frac, frac

    def count_pushed_before(self, push_index: int) -> int:
        """How many resident transitions were pushed before the ``push_index``-th push."""
        return int(np.count_nonzero((self.stamps[: self.size] >= 0)
                                    & (self.stamps[: self.size] < push_index)))
