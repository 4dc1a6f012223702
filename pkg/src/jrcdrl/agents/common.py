"""Exploration and the hyper-parameter records shared by all learners."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


def epsilon_greedy(q_values, epsilon: float, rng: np.random.Generator) -> int:
    """Random action with probability ``epsilon``, else the lowest-index argmax.

    Exactly one uniform draw is consumed per call, plus one integer draw when
    exploring.
    """
    if rng.random() < epsilon:
        return int(rng.integers(len(q_values)))
    return int(np.argmax(q_values))


@dataclass(frozen=True)
class ExplorationSchedule:
    """Multiplicative epsilon decay, floored at ``end``.

    ``per`` selects whether the decay factor is applied once per episode or
    once per environment step.
    """

    start: float = 1.0
    end: float = 0.01
    decay: float = 0.995
    per: str = "episode"

    def __post_init__(self):
        if not 0.0 <= self.end <= self.start <= 1.0:
            raise ConfigError("need 0 <= epsilon end <= start <= 1")
        if not 0.0 < self.decay <= 1.0:
            raise ConfigError("epsilon decay must lie in (0, 1]")
        if self.per not in ("episode", "step"):
            raise ConfigError("epsilon decay granularity is 'episode' or 'step'")

    def value(self, episode: int, step: int = 0) -> float:
        """Epsilon for 0-based ``episode`` and global 0-based ``step``."""
        k = episode if self.per == "episode" else step
        return max(self.end, self.start * self.decay ** k)


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    batch_size: int = 64
    target_sync: int = 300
    buffer_capacity: int = 50_000
    demo_size: int = 20_000
    lr: float = 1e-3
    episodes: int = 400
    eps_start: float = 1.0
    eps_end: float = 0.01
    eps_decay: float = 0.995
    eps_decay_per: str = "episode"
    demo_epsilon: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must lie in [0, 1)")
        if self.target_sync < 1:
            raise ConfigError("target_sync must be at least 1")
        for name in ("batch_size", "buffer_capacity", "demo_size", "episodes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        self.exploration()

    def exploration(self) -> ExplorationSchedule:
        return ExplorationSchedule(self.eps_start, self.eps_end, self.eps_decay,
                                   self.eps_decay_per)


@dataclass(frozen=True)
class TLwDConfig:
    lambda_n: float = 1.0  # multi-step TD loss weight
    lambda_e: float = 1.0  # margin loss weight
    lambda_l2: float = 1e-5
    n: int = 10
    pretrain_steps: int = 10_000
    margin: float = 1.0
    alpha: float = 0.4
    beta_start: float = 0.6
    beta_end: float = 1.0
    priority_eps: float = 1e-3
    demo_bonus: float = 1.0
    bootstrap: str = "double"  # or "max" for the single-network n-step bootstrap

    def __post_init__(self):
        if min(self.lambda_n, self.lambda_e, self.lambda_l2) < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.pretrain_steps < 0:
            raise ConfigError("pretrain_steps must be non-negative")
        if self.bootstrap not in ("double", "max"):
            raise ConfigError("bootstrap must be 'double' or 'max'")
        if not (0.0 <= self.beta_start <= 1.0 and 0.0 <= self.beta_end <= 1.0):
            raise ConfigError("beta values must lie in [0, 1]")
        if self.beta_end < self.beta_start:
            raise ConfigError("beta must not decrease")
