"""Fixed-capacity FIFO replay storage."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class Batch(NamedTuple):
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s2: np.ndarray
    done: np.ndarray


class ReplayBuffer:
    def __init__(self, capacity: int, state_dim: int, action_dim: int, dtype=np.float32):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.s = np.zeros((capacity, state_dim), dtype=dtype)
        self.a = np.zeros((capacity, action_dim), dtype=dtype)
        self.r = np.zeros(capacity, dtype=dtype)
        self.s2 = np.zeros((capacity, state_dim), dtype=dtype)
        self.done = np.zeros(capacity, dtype=dtype)
        self._next = 0
        self.size = 0
        self.inserted = 0

    def __len__(self) -> int:
        return self.size

    def add(self, s, a, r, s2, done) -> None:
        a = np.asarray(a)
        if np.any(np.abs(a) > 1.0):
            raise ValueError("actions must lie in [-1, 1]")
        i = self._next
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s2[i] = s2
        self.done[i] = float(done)
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.inserted += 1

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if batch_size > self.size:
            raise ValueError(f"cannot draw {batch_size} from {self.size} stored transitions")
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return Batch(self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.done[idx])

    def oldest_index(self) -> int:
        return self._next if self.size == self.capacity else 0
