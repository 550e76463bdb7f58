"""Ring replay buffers, single-agent and population-stacked.

The stacked buffer stores one ring per population slot in (pop, capacity, d)
arrays sharing a single cursor: every slot appends exactly one transition per
environment step, and buffers stay with their slot when the agent in it is
replaced, so the cursors never drift apart. The single-agent buffer is the
pop=1 case with a flat view.
"""
from __future__ import annotations

import numpy as np


class StackedReplayBuffer:
    def __init__(self, pop: int, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1 or pop < 1:
            raise ValueError("pop and capacity must be positive")
        self.pop = pop
        self.capacity = capacity
        self.states = np.zeros((pop, capacity, state_dim), dtype=np.float32)
        self.actions = np.zeros((pop, capacity, action_dim), dtype=np.float32)
        self.rewards = np.zeros((pop, capacity), dtype=np.float32)
        self.next_states = np.zeros((pop, capacity, state_dim), dtype=np.float32)
        self.dones = np.zeros((pop, capacity), dtype=np.float32)
        self.ptr = 0
        self.size = 0

    def append_batch(self, states, actions, rewards, next_states, dones) -> None:
        """One transition per slot; the oldest entry is overwritten when full."""
        p = self.ptr
        self.states[:, p] = states
        self.actions[:, p] = actions
        self.rewards[:, p] = rewards
        self.next_states[:, p] = next_states
        self.dones[:, p] = dones
        self.ptr = (p + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, rngs, batch: int) -> np.ndarray:
        """(pop, batch) uniform indices, one draw per slot rng in slot order."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return np.stack([rng.integers(0, self.size, size=batch) for rng in rngs])

    def row_view(self, i: int) -> "StackedReplayBuffer":
        """Pop-1 buffer sharing slot i's storage, with an independent cursor.

        Lets one slot be advanced alone; since every slot appends the same
        number of transitions per phase, the parent cursor can be set to any
        view's cursor afterwards.
        """
        v = object.__new__(StackedReplayBuffer)
        v.pop = 1
        v.capacity = self.capacity
        v.states = self.states[i : i + 1]
        v.actions = self.actions[i : i + 1]
        v.rewards = self.rewards[i : i + 1]
        v.next_states = self.next_states[i : i + 1]
        v.dones = self.dones[i : i + 1]
        v.ptr = self.ptr
        v.size = self.size
        return v

    def gather(self, idx: np.ndarray) -> dict[str, np.ndarray]:
        rows = np.arange(self.pop)[:, None]
        return {
            "states": self.states[rows, idx],
            "actions": self.actions[rows, idx],
            "rewards": self.rewards[rows, idx],
            "next_states": self.next_states[rows, idx],
            "dones": self.dones[rows, idx],
        }


class ReplayBuffer:
    """Uniform ring buffer for one agent."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        self._stack = StackedReplayBuffer(1, capacity, state_dim, action_dim)

    @property
    def capacity(self) -> int:
        return self._stack.capacity

    def __len__(self) -> int:
        return self._stack.size

    def append(self, state, action, reward, next_state, done: bool) -> None:
        self._stack.append_batch(
            np.asarray(state)[None],
            np.asarray(action)[None],
            np.asarray([reward]),
            np.asarray(next_state)[None],
            np.asarray([1.0 if done else 0.0]),
        )

    def sample(self, batch: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        idx = self._stack.sample_indices([rng], batch)
        return {k: v[0] for k, v in self._stack.gather(idx).items()}
