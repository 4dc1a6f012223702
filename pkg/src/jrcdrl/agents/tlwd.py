"""Transfer learning with demonstrations.

The learner keeps source-environment demonstrations in a protected slice of a
prioritized buffer, pre-trains on them, and then keeps training on the mix of
demonstrations and fresh target-environment data with a loss that combines
one-step double-Q TD error, an n-step TD error, a large-margin term that
pulls the demonstrated action above the rest, and L2 weight decay.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import nn
from ..env import STATE_FEATURES, EnvConfig, JRCEnv
from ..errors import ConfigError, ContractViolation
from ..replay import (Batch, DemoDataset, LinearSchedule, NStepAccumulator, PrioritizedBuffer)
from .common import TLwDConfig, TrainConfig, epsilon_greedy
from .ddqn import N_FEATURES, double_bootstrap, grouped_gradients


@dataclass
class LossTerms:
    total: float
    ddqn: float
    n_step: float
    margin: float
    l2: float
    td_errors: np.ndarray  # one-step, used for priorities
    grads: Optional[nn.GradientSet] = None


def _targets(batch: Batch, q_online, q_target, gamma, cfg: TLwDConfig):
    boot1 = double_bootstrap(q_online[batch.next_state], q_target[batch.next_state])
    y1 = np.where(batch.terminal, batch.reward, batch.reward + gamma * boot1)
    if cfg.bootstrap == "double":
        boot_n = double_bootstrap(q_online[batch.n_step_state], q_target[batch.n_step_state])
    else:
        boot_n = q_target[batch.n_step_state].max(axis=1)
    disc = gamma ** batch.n_step_horizon.astype(float)
    y_n = np.where(batch.n_step_done, batch.n_step_return, batch.n_step_return + disc * boot_n)
    return y1, y_n


def _evaluate(online, target, batch: Batch, is_weights, train: TrainConfig, cfg: TLwDConfig,
              with_grads: bool, q_target_all=None) -> LossTerms:
    if batch.n_step_horizon is None or np.any(batch.n_step_horizon < 1):
        raise ContractViolation("batch lacks n-step fields")
    w = np.ones(len(batch)) if is_weights is None else np.asarray(is_weights, dtype=float)
    q_all, inputs = nn.forward_cached(online, STATE_FEATURES)
    if q_target_all is None:
        q_target_all = nn.forward(target, STATE_FEATURES)
    y1, y_n = _targets(batch, q_all, q_target_all, train.gamma, cfg)
    s, a = batch.state, batch.action
    n = len(batch)
    q_sa = q_all[s, a]
    err1 = y1 - q_sa
    err_n = y_n - q_sa
    j_ddqn = float(np.sum(w * err1 * err1) / n)
    j_n = float(np.sum(w * err_n * err_n) / n)

    # large-margin term on demonstration rows only
    demo = batch.is_demo.astype(bool)
    q_s = q_all[s]
    boosted = q_s + cfg.margin
    boosted[np.arange(n), a] = q_sa
    top = np.argmax(boosted, axis=1)
    per_row = np.where(demo, boosted[np.arange(n), top] - q_sa, 0.0)
    j_e = float(per_row.sum() / n)

    j_l2 = nn.l2_penalty(online)
    total = j_ddqn + cfg.lambda_n * j_n + cfg.lambda_e * j_e + cfg.lambda_l2 * j_l2
    terms = LossTerms(total, j_ddqn, j_n, j_e, j_l2, err1)
    if with_grads:
        d_rows = -2.0 * w * (err1 + cfg.lambda_n * err_n) / n
        states = [s]
        actions = [a]
        rows = [d_rows]
        if demo.any():
            coef = cfg.lambda_e / n
            states += [s[demo], s[demo]]
            actions += [top[demo], a[demo]]
            rows += [np.full(demo.sum(), coef), np.full(demo.sum(), -coef)]
        grads = grouped_gradients(online, inputs, np.concatenate(rows), np.concatenate(states),
                                  np.concatenate(actions))
        terms.grads = grads + (2.0 * cfg.lambda_l2) * nn.GradientSet(
            [x.copy() for x in online.weights], [x.copy() for x in online.biases])
    return terms


def tlwd_loss(online: nn.NetworkParams, target: nn.NetworkParams, batch: Batch, is_weights,
              cfg: TLwDConfig, gamma: float = 0.99) -> tuple[float, dict]:
    """Combined loss value and its components for one batch."""
    terms = _evaluate(online, target, batch, is_weights, TrainConfig(gamma=gamma), cfg, False)
    return terms.total, {"ddqn": terms.ddqn, "n_step": terms.n_step, "margin": terms.margin,
                         "l2": terms.l2}


class TLwDAgent:
    kind = "tlwd"

    def __init__(self, n_actions: int, train: TrainConfig, cfg: TLwDConfig,
                 demos: DemoDataset, rng: np.random.Generator, total_steps: int = 0,
                 params: Optional[nn.NetworkParams] = None):
        if len(demos) == 0:
            raise ConfigError("TLwD needs a non-empty demonstration set")
        self.train_cfg = train
        self.cfg = cfg
        self.rng = rng
        self.n_actions = n_actions
        self.online = params.copy() if params is not None else nn.init_params(
            nn.network_dims(N_FEATURES, n_actions), rng)
        self.target = nn.sync_target(self.online)
        self.buffer = PrioritizedBuffer(train.buffer_capacity, alpha=cfg.alpha,
                                        eps=cfg.priority_eps, demo_bonus=cfg.demo_bonus)
        self.buffer.load_demonstrations(demos.transitions)
        self.beta = LinearSchedule(cfg.beta_start, cfg.beta_end, total_steps)
        self._nstep = NStepAccumulator(cfg.n, train.gamma)
        self.pretrain_steps = 0
        self.steps = 0
        self.train_steps = 0
        self.sync_steps: list[int] = []
        self.last_loss: Optional[LossTerms] = None
        self._q_target_all = nn.forward(self.target, STATE_FEATURES)

    def q_values(self, state) -> np.ndarray:
        return nn.forward(self.online, STATE_FEATURES[state.encode()])

    def act(self, state, epsilon: float) -> int:
        return epsilon_greedy(self.q_values(state), epsilon, self.rng)

    def greedy_actions(self) -> np.ndarray:
        return np.argmax(nn.forward(self.online, STATE_FEATURES), axis=1)

    def sync(self, step: int) -> None:
        self.target = nn.sync_target(self.online)
        self._q_target_all = nn.forward(self.target, STATE_FEATURES)
        self.sync_steps.append(step)

    def gradient_step(self, beta: float) -> LossTerms:
        batch = self.buffer.sample(self.train_cfg.batch_size, self.rng, beta)
        terms = _evaluate(self.online, self.target, batch, batch.weights, self.train_cfg,
                          self.cfg, True, self._q_target_all)
        nn.sgd_step(self.online, terms.grads, self.train_cfg.lr)
        self.buffer.update_priorities(batch.indices, terms.td_errors, batch.generations)
        self.train_steps += 1
        self.last_loss = terms
        return terms

    def pretrain(self, steps: Optional[int] = None) -> None:
        steps = self.cfg.pretrain_steps if steps is None else steps
        beta = self.beta(0)
        for _ in range(steps):
            self.gradient_step(beta)
            self.pretrain_steps += 1
            if self.pretrain_steps % self.train_cfg.target_sync == 0:
                self.sync(-self.pretrain_steps)

    def observe(self, state, action, reward, next_state, terminal=False, learn=True):
        if not learn:
            return
        for tr in self._nstep.add(state, action, reward, next_state, terminal):
            self.buffer.push(tr)
        self.steps += 1
        self.gradient_step(self.beta(self.steps))
        if self.steps % self.train_cfg.target_sync == 0:
            self.sync(self.steps)

    def end_episode(self, learn=True):
        if learn:
            for tr in self._nstep.flush():
                self.buffer.push(tr)

    def snapshot(self) -> nn.NetworkParams:
        return self.online.copy()


def pretrain(agent: TLwDAgent, steps: Optional[int] = None) -> None:
    agent.pretrain(steps)


def collect_demonstrations(params: nn.NetworkParams, env_config: EnvConfig, count: int,
                           rng: np.random.Generator, n: int = 10, gamma: float = 0.99,
                           epsilon: float = 0.01) -> DemoDataset:
    """Roll out a trained network in ``env_config`` and record ``count``
    demonstration transitions with their n-step summaries."""
    if count < 1:
        raise ConfigError("demonstration count must be positive")
    env = JRCEnv(env_config, rng)
    out = []
    while len(out) < count:
        acc = NStepAccumulator(n, gamma, is_demo=True)
        state = env.reset()
        done = False
        while not done:
            q = nn.forward(params, STATE_FEATURES[state.encode()])
            action = epsilon_greedy(q, epsilon, rng)
            result, done = env.step(action)
            out.extend(acc.add(state, action, result.reward, result.next_state))
            state = result.next_state
        out.extend(acc.flush())
    return DemoDataset(out[:count], n=n, gamma=gamma)
