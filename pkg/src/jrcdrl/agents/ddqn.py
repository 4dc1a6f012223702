"""Double DQN and direct policy reuse."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .. import nn
from ..env import N_STATES, STATE_FEATURES, EnvState
from ..errors import NotReady
from ..replay import Batch, ReplayBuffer, Transition
from .common import TrainConfig, epsilon_greedy

N_FEATURES = STATE_FEATURES.shape[1]


def double_bootstrap(q_online_next: np.ndarray, q_target_next: np.ndarray) -> np.ndarray:
    """Target-network value of the action the online network prefers."""
    best = np.argmax(q_online_next, axis=-1)
    return np.take_along_axis(q_target_next, best[..., None], axis=-1)[..., 0]


def ddqn_target(reward, next_features, terminal, online: nn.NetworkParams,
                target: nn.NetworkParams, gamma: float):
    """``reward + gamma * Q_target(s', argmax_a Q_online(s', a))``; no bootstrap
    past a terminal step. Works on a single transition or a batch."""
    boot = double_bootstrap(nn.forward(online, next_features), nn.forward(target, next_features))
    return np.where(terminal, reward, reward + gamma * boot)


def grouped_gradients(params: nn.NetworkParams, inputs, d_rows: np.ndarray,
                      states: np.ndarray, actions: np.ndarray) -> nn.GradientSet:
    """Backpropagate per-sample output errors through the all-state forward
    pass; samples that share a state are summed before the backward pass."""
    d_out = np.zeros((N_STATES, params.weights[-1].shape[1]))
    np.add.at(d_out, (states, actions), d_rows)
    return nn.backward(params, inputs, d_out)


class DDQNAgent:
    """Online/target network pair trained from uniform replay."""

    kind = "ddqn"

    def __init__(self, n_actions: int, cfg: TrainConfig, rng: np.random.Generator,
                 params: Optional[nn.NetworkParams] = None, buffer=None):
        self.cfg = cfg
        self.rng = rng
        self.n_actions = n_actions
        self.online = params.copy() if params is not None else nn.init_params(
            nn.network_dims(N_FEATURES, n_actions), rng)
        self.target = nn.sync_target(self.online)
        self.buffer = buffer if buffer is not None else ReplayBuffer(cfg.buffer_capacity)
        self.steps = 0
        self.train_steps = 0
        self.sync_steps: list[int] = []
        self.last_loss: Optional[float] = None
        self._q_target_all = nn.forward(self.target, STATE_FEATURES)

    # acting -----------------------------------------------------------
    def q_values(self, state: EnvState) -> np.ndarray:
        return nn.forward(self.online, STATE_FEATURES[state.encode()])

    def act(self, state: EnvState, epsilon: float) -> int:
        return epsilon_greedy(self.q_values(state), epsilon, self.rng)

    def greedy_actions(self) -> np.ndarray:
        return np.argmax(nn.forward(self.online, STATE_FEATURES), axis=1)

    # learning ---------------------------------------------------------
    def observe(self, state, action, reward, next_state, terminal=False, learn=True):
        if not learn:
            return
        self.buffer.push(Transition(state, action, reward, next_state, terminal))
        self.steps += 1
        self.train_step()
        if self.steps % self.cfg.target_sync == 0:
            self.sync()

    def end_episode(self, learn=True):
        pass

    def sync(self) -> None:
        self.target = nn.sync_target(self.online)
        self._q_target_all = nn.forward(self.target, STATE_FEATURES)
        self.sync_steps.append(self.steps)

    def sample(self) -> Batch:
        return self.buffer.sample(self.cfg.batch_size, self.rng)

    def train_step(self) -> Optional[float]:
        """One SGD step on a uniformly drawn batch; None while the buffer is cold."""
        try:
            batch = self.sample()
        except NotReady:
            return None
        q_all, inputs = nn.forward_cached(self.online, STATE_FEATURES)
        boot = double_bootstrap(q_all[batch.next_state], self._q_target_all[batch.next_state])
        y = np.where(batch.terminal, batch.reward, batch.reward + self.cfg.gamma * boot)
        err = y - q_all[batch.state, batch.action]
        n = len(batch)
        loss = float(np.sum(batch.weights * err * err) / n)
        grads = grouped_gradients(self.online, inputs, -2.0 * batch.weights * err / n,
                                  batch.state, batch.action)
        nn.sgd_step(self.online, grads, self.cfg.lr)
        self.train_steps += 1
        self.last_loss = loss
        return loss

    def snapshot(self) -> nn.NetworkParams:
        return self.online.copy()


def ddqn_train_step(agent: DDQNAgent) -> Optional[float]:
    return agent.train_step()


def dpr_initialize(path, n_actions: int, cfg: TrainConfig,
                   rng: np.random.Generator) -> DDQNAgent:
    """DDQN agent whose online and target networks start from saved weights."""
    params = nn.load(path, expected_dims=nn.network_dims(N_FEATURES, n_actions))
    agent = DDQNAgent(n_actions, cfg, rng, params=params)
    agent.kind = "dpr"
    return agent
