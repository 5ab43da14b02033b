"""Replay buffers: FIFO and fairness-stratified."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ..planner import N_BRACKETS, bracket_of


class NotReady(RuntimeError):
    """Raised when sampling from a buffer that holds nothing to sample."""


@dataclass
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    done: bool
    next_obs: np.ndarray
    info: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        a = np.asarray(self.action, dtype=float)
        if np.any((a < 0.0) | (a > 1.0)):
            raise ValueError("action components must lie in [0, 1]")


class ReplayBuffer:
    """First-in-first-out ring buffer with uniform sampling."""

    def __init__(self, capacity: int = 100_000, seed: int | None = None) -> None:
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.storage: list[Transition] = []
        self._next = 0
        self.rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return len(self.storage)

    def add(self, transition: Transition) -> None:
        if len(self.storage) < self.capacity:
            self.storage.append(transition)
        else:
            self.storage[self._next] = transition
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int) -> list[Transition]:
        if not self.storage:
            raise NotReady("buffer is empty")
        idx = self.rng.integers(len(self.storage), size=batch_size)
        return [self.storage[i] for i in idx]


class _IndexSet:
    """Insertion, removal and uniform draw in O(1)."""

    def __init__(self) -> None:
        self.items: list[int] = []
        self._pos: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, i: int) -> bool:
        return i in self._pos

    def add(self, i: int) -> None:
        self._pos[i] = len(self.items)
        self.items.append(i)

    def remove(self, i: int) -> None:
        k = self._pos.pop(i)
        last = self.items.pop()
        if k < len(self.items):
            self.items[k] = last
            self._pos[last] = k


def mean_obs_fairness(n_firms: int) -> Callable[[Transition], float]:
    """Key a transition by the mean firm fairness in its observation."""

    def key(t: Transition) -> float:
        return float(np.mean(t.obs[:n_firms]))

    return key


def mean_info_fairness(t: Transition) -> float:
    """Key a transition by the mean realized fairness in ``info``."""
    return float(np.mean(t.info["fairness"]))


class FairReplayBuffer(ReplayBuffer):
    """Replay buffer that samples evenly across fairness brackets.

    Every transition is filed under the bracket of ``key(transition)``.
    Sampling draws ``batch_size // n_brackets`` transitions (with
    replacement) from each bracket; quota belonging to empty brackets is
    spread evenly over the non-empty ones so the batch size is preserved.
    Overflow evicts the globally oldest transition.
    """

    def __init__(
        self,
        capacity: int = 100_000,
        n_brackets: int = N_BRACKETS,
        key: Callable[[Transition], float] = mean_info_fairness,
        seed: int | None = None,
    ) -> None:
        super().__init__(capacity, seed)
        self.n_brackets = n_brackets
        self.key = key
        self.bracket_index = {i: _IndexSet() for i in range(n_brackets)}
        self._slot_bracket: list[int] = []

    def add(self, transition: Transition) -> None:
        i = bracket_of(min(max(self.key(transition), 0.0), 1.0), self.n_brackets)
        slot = self._next
        if len(self.storage) < self.capacity:
            self.storage.append(transition)
            self._slot_bracket.append(i)
        else:
            self.bracket_index[self._slot_bracket[slot]].remove(slot)
            self.storage[slot] = transition
            self._slot_bracket[slot] = i
        self.bracket_index[i].add(slot)
        self._next = (slot + 1) % self.capacity

    def bracket_sizes(self) -> list[int]:
        return [len(self.bracket_index[i]) for i in range(self.n_brackets)]

    def quotas(self, batch_size: int) -> dict[int, int]:
        live = [i for i in range(self.n_brackets) if len(self.bracket_index[i])]
        if not live:
            raise NotReady("buffer is empty")
        base = batch_size // self.n_brackets
        spare = batch_size - base * len(live)
        extra, rem = divmod(spare, len(live))
        quota = {i: base + extra for i in live}
        for i in self.rng.choice(live, size=rem, replace=False):
            quota[int(i)] += 1
        return quota

    def sample(self, batch_size: int) -> list[Transition]:
        batch = []
        for i, q in self.quotas(batch_size).items():
            items = self.bracket_index[i].items
            picks = self.rng.integers(len(items), size=q)
            batch.extend(self.storage[items[k]] for k in picks)
        order = self.rng.permutation(len(batch))
        return [batch[k] for k in order]
