"""Tabular Q-learning and a value-iteration reference solver."""
from __future__ import annotations

import numpy as np

from ..env import N_STATES, EnvState
from .common import epsilon_greedy


class QTable:
    def __init__(self, n_states: int = N_STATES, n_actions: int = 4):
        self.values = np.zeros((n_states, n_actions))
        self.counts = np.zeros((n_states, n_actions), dtype=np.int64)

    def greedy_policy(self) -> np.ndarray:
        return np.argmax(self.values, axis=1)


def q_learning_update(table: QTable, s: int, a: int, reward: float, s_next: int,
                      gamma: float, terminal: bool = False) -> float:
    """One Bellman backup with the per-pair harmonic rate 1 / (1 + visits).

    Returns the learning rate that was used.
    """
    rate = 1.0 / (1.0 + table.counts[s, a])
    bootstrap = 0.0 if terminal else gamma * table.values[s_next].max()
    table.values[s, a] += rate * (reward + bootstrap - table.values[s, a])
    table.counts[s, a] += 1
    return rate


class QLearningAgent:
    kind = "qlearning"

    def __init__(self, n_actions: int, gamma: float, rng: np.random.Generator):
        self.table = QTable(N_STATES, n_actions)
        self.gamma = gamma
        self.rng = rng
        self.steps = 0

    def act(self, state: EnvState, epsilon: float) -> int:
        return epsilon_greedy(self.table.values[state.encode()], epsilon, self.rng)

    def observe(self, state, action, reward, next_state, terminal=False, learn=True):
        if learn:
            q_learning_update(self.table, state.encode(), action, reward, next_state.encode(),
                              self.gamma, terminal)
            self.steps += 1

    def end_episode(self, learn=True):
        pass

    def greedy_actions(self) -> np.ndarray:
        return self.table.greedy_policy()

    def snapshot(self):
        return self.table.values.copy()


def value_iteration(rewards: np.ndarray, transitions: np.ndarray, gamma: float,
                    tol: float = 1e-10, max_iter: int = 100_000) -> tuple[np.ndarray, np.ndarray]:
    """Optimal action values for a finite MDP.

    ``rewards`` is (S, A); ``transitions`` is (S, A, S) or, for
    action-independent dynamics, (S, S). Returns (Q, greedy policy).
    """
    if transitions.ndim == 2:
        transitions = np.broadcast_to(transitions[:, None, :],
                                      (rewards.shape[0], rewards.shape[1], transitions.shape[1]))
    v = np.zeros(rewards.shape[0])
    for _ in range(max_iter):
        q = rewards + gamma * transitions @ v
        v_new = q.max(axis=1)
        if np.max(np.abs(v_new - v)) < tol * (1.0 - gamma):
            v = v_new
            break
        v = v_new
    q = rewards + gamma * transitions @ v
    return q, np.argmax(q, axis=1)
