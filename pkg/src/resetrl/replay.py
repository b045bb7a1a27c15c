"""FIFO ring buffers backed by preallocated numpy arrays.

Three flavors: 1-step transitions for the forward agent, n-step segments
for the reset learners, and plain initial-state examples. Sampling is
uniform over current contents and raises on an empty buffer.
"""

from __future__ import annotations

import numpy as np

Array = np.ndarray


class _Ring:
    """Shared ring-index bookkeeping: append overwrites the oldest entry."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.size = 0
        self.head = 0

    def _advance(self) -> int:
        idx = self.head
        self.head = (self.head + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return idx

    def _sample_idx(self, rng: np.random.Generator, batch: int) -> Array:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(0, self.size, size=batch)

    def __len__(self) -> int:
        return self.size


class TransitionBuffer(_Ring):
    """(s, a, r, s', terminal) records for 1-step TD learning."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        super().__init__(capacity)
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros((capacity, action_dim))
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, state_dim))
        self.terminal = np.zeros(capacity)

    def add(self, s: Array, a: Array, r: float, s2: Array, terminal: bool) -> None:
        i = self._advance()
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s2[i] = s2
        self.terminal[i] = 1.0 if terminal else 0.0

    def sample(self, rng: np.random.Generator, batch: int):
        idx = self._sample_idx(rng, batch)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.terminal[idx]


class SegmentBuffer(_Ring):
    """Transitions plus their realized n-step successor, for reset learning.

    ``s_tail`` is the state n' steps ahead within the same episode
    (n' <= n, shorter when the episode ends first). The next-state
    bookkeeping fields (distance to initial, initial/terminal flags) let
    the reward-based baselines recompute their reset rewards without
    touching the environment.
    """

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        super().__init__(capacity)
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros((capacity, action_dim))
        self.s_next = np.zeros((capacity, state_dim))
        self.s_tail = np.zeros((capacity, state_dim))
        self.n_realized = np.zeros(capacity, dtype=np.int64)
        self.next_dist_initial = np.zeros(capacity)
        self.next_is_initial = np.zeros(capacity)
        self.next_terminal = np.zeros(capacity)

    def add(self, s, a, s_next, s_tail, n_realized, next_dist_initial,
            next_is_initial, next_terminal) -> None:
        if not 1 <= n_realized:
            raise ValueError("n_realized must be >= 1")
        i = self._advance()
        self.s[i] = s
        self.a[i] = a
        self.s_next[i] = s_next
        self.s_tail[i] = s_tail
        self.n_realized[i] = n_realized
        self.next_dist_initial[i] = next_dist_initial
        self.next_is_initial[i] = 1.0 if next_is_initial else 0.0
        self.next_terminal[i] = 1.0 if next_terminal else 0.0

    def sample(self, rng: np.random.Generator, batch: int):
        idx = self._sample_idx(rng, batch)
        return (self.s[idx], self.a[idx], self.s_next[idx], self.s_tail[idx],
                self.n_realized[idx], self.next_dist_initial[idx],
                self.next_is_initial[idx], self.next_terminal[idx])


class ExampleBuffer(_Ring):
    """Initial-state observations collected at forward-episode starts."""

    def __init__(self, capacity: int, state_dim: int):
        super().__init__(capacity)
        self.s = np.zeros((capacity, state_dim))

    def add(self, s: Array) -> None:
        self.s[self._advance()] = s

    def sample(self, rng: np.random.Generator, batch: int) -> Array:
        return self.s[self._sample_idx(rng, batch)]
