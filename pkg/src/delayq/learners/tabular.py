"""Tabular Q-learning primitives with per-pair 1/n step sizes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class QTable:
    """Action values plus visit counts; step size is 1/n(s, a)."""

    values: np.ndarray
    visit_counts: np.ndarray

    @classmethod
    def zeros(cls, n_states: int, n_actions: int) -> "QTable":
        return cls(
            values=np.zeros((n_states, n_actions)),
            visit_counts=np.zeros((n_states, n_actions), dtype=np.int64),
        )

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]


def epsilon_greedy(q_values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Uniform action with probability epsilon, else lowest-index argmax."""
    q_values = np.asarray(q_values, dtype=float)
    if q_values.size == 0:
        raise ValueError("empty action-value vector")
    if not (0.0 <= epsilon <= 1.0):
        raise ValueError("epsilon must lie in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(0, q_values.size))
    return int(np.argmax(q_values))


def tabular_q_update(
    table: QTable,
    s: int,
    a: int,
    reward_target: float,
    s_next: int,
    gamma: float,
    terminal: bool = False,
) -> QTable:
    """One asynchronous update of (s, a) with step size 1/n(s, a)."""
    n_states, n_actions = table.values.shape
    if not (0 <= s < n_states and 0 <= a < n_actions and 0 <= s_next < n_states):
        raise IndexError(f"indices ({s}, {a}, {s_next}) out of range for {table.values.shape}")
    table.visit_counts[s, a] += 1
    alpha = 1.0 / table.visit_counts[s, a]
    bootstrap = 0.0 if terminal else gamma * float(np.max(table.values[s_next]))
    table.values[s, a] += alpha * (reward_target + bootstrap - table.values[s, a])
    return table
