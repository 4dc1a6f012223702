"""The JRC decision process: factor states, unexpected events, actions, rewards."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import radar
from .errors import ConfigError, ContractViolation

FACTORS = ("c", "r", "w", "v", "m")
RISK_FACTORS = ("r", "w", "v", "m")
N_STATES = 2 ** len(FACTORS)


class EnvState(NamedTuple):
    """Binary factor values; 1 marks the unfavourable condition."""

    c: int  # channel
    r: int  # road
    w: int  # weather
    v: int  # speed
    m: int  # nearby vehicles

    def encode(self) -> int:
        return (self.c << 4) | (self.r << 3) | (self.w << 2) | (self.v << 1) | self.m

    @classmethod
    def decode(cls, index: int) -> "EnvState":
        if not 0 <= index < N_STATES:
            raise ContractViolation(f"state index {index} outside [0, {N_STATES})")
        return cls(*((index >> shift) & 1 for shift in (4, 3, 2, 1, 0)))

    def features(self) -> np.ndarray:
        return np.asarray(self, dtype=float)


ALL_STATES = tuple(EnvState.decode(i) for i in range(N_STATES))
STATE_FEATURES = np.array([s.features() for s in ALL_STATES])


@dataclass(frozen=True)
class FactorProbabilities:
    """Event probabilities per risk-factor value and favourable-state priors.

    ``event[f] = (p0, p1)`` is the event probability when factor ``f`` is 0/1;
    ``tau0[f]`` is the probability that factor ``f`` sits at 0.
    """

    event: dict
    tau0: dict

    def __post_init__(self):
        if set(self.event) != set(RISK_FACTORS):
            raise ConfigError(f"event probabilities needed for exactly {RISK_FACTORS}")
        if set(self.tau0) != set(FACTORS):
            raise ConfigError(f"tau0 needed for exactly {FACTORS}")
        for f, pair in self.event.items():
            if len(pair) != 2 or not all(0.0 <= p <= 1.0 for p in pair):
                raise ConfigError(f"event probabilities for {f!r} must be two values in [0, 1]")
        for f, t in self.tau0.items():
            if not 0.0 <= t <= 1.0:
                raise ConfigError(f"tau0[{f!r}] must lie in [0, 1]")

    def expected_event_probability(self) -> float:
        """Closed-form average of the per-state event probability."""
        return sum(
            self.tau0[f] * self.event[f][0] + (1.0 - self.tau0[f]) * self.event[f][1]
            for f in RISK_FACTORS
        )


@dataclass(frozen=True)
class CommConfig:
    packets_good: tuple = (2, 4)  # per rate, low to high, when c = 0
    packets_bad: tuple = (2, 0)  # per rate when c = 1
    max_packets: int = 4

    def __post_init__(self):
        if len(self.packets_good) != len(self.packets_bad) or not self.packets_good:
            raise ConfigError("packets_good and packets_bad need one entry per rate")
        for bad, good in zip(self.packets_bad, self.packets_good):
            if not 0 <= bad <= good <= self.max_packets:
                raise ConfigError("need 0 <= packets_bad <= packets_good <= max_packets")

    @property
    def n_rates(self) -> int:
        return len(self.packets_good)


@dataclass(frozen=True)
class RewardWeights:
    comm_gain: float = 1.0  # per delivered packet, no event
    comm_penalty: float = 100.0  # communicating through an event
    radar_cost: float = 1.0  # sensing when nothing happens
    radar_gain: float = 50.0  # sensing an event, scaled by detection quality

    def __post_init__(self):
        if min(self.comm_gain, self.comm_penalty, self.radar_cost, self.radar_gain) < 0:
            raise ConfigError("reward weights must be non-negative")


def default_chirps() -> list[radar.ChirpConfig]:
    return [
        radar.ChirpConfig(bandwidth=300e6, slope=10e12, r_max_override=225.0),  # long
        radar.ChirpConfig(bandwidth=750e6, slope=15e12, r_max_override=45.0),  # short
    ]


@dataclass(frozen=True)
class EnvConfig:
    probs: FactorProbabilities
    comm: CommConfig = field(default_factory=CommConfig)
    rewards: RewardWeights = field(default_factory=RewardWeights)
    density: float = 27.0  # objects per 45 m x 45 m
    radar_modes: tuple = field(default_factory=lambda: tuple(default_chirps()))
    sizes: radar.SizeDistributions = field(default_factory=radar.SizeDistributions)
    episode_length: int = 300

    def __post_init__(self):
        if self.density <= 0:
            raise ConfigError("density must be positive")
        if self.episode_length <= 0:
            raise ConfigError("episode_length must be positive")
        if not self.radar_modes:
            raise ConfigError("at least one radar mode is required")
        object.__setattr__(self, "radar_modes", tuple(self.radar_modes))
        object.__setattr__(self, "_modes", tuple(radar.derive_ranges(c) for c in self.radar_modes))

    @property
    def modes(self) -> tuple:
        return self._modes

    @property
    def n_actions(self) -> int:
        return len(self.radar_modes) + self.comm.n_rates

    def action_space(self) -> list["Action"]:
        return [Action.from_index(i, len(self.radar_modes)) for i in range(self.n_actions)]


@dataclass(frozen=True)
class Action:
    """Radar modes occupy indices [0, K), communication rates [K, K + L).

    With the default two modes and two rates: 0 radar long, 1 radar short,
    2 comm low, 3 comm high.
    """

    kind: str  # "radar" | "comm"
    level: int  # mode or rate index, 0-based

    @classmethod
    def from_index(cls, index: int, n_radar: int) -> "Action":
        if index < 0:
            raise ContractViolation(f"negative action index {index}")
        if index < n_radar:
            return cls("radar", index)
        return cls("comm", index - n_radar)

    def index(self, n_radar: int) -> int:
        return self.level if self.kind == "radar" else n_radar + self.level

    @property
    def is_radar(self) -> bool:
        return self.kind == "radar"


RADAR_LONG, RADAR_SHORT, COMM_LOW, COMM_HIGH = range(4)


@dataclass(frozen=True)
class StepResult:
    reward: float
    next_state: EnvState
    event_occurred: bool
    packets_sent: int
    miss_ratio: Optional[float]
    objects: int = 0
    detected: int = 0


def sample_state(probs: FactorProbabilities, rng: np.random.Generator) -> EnvState:
    u = rng.random(len(FACTORS))
    return EnvState(*(int(u[k] >= probs.tau0[f]) for k, f in enumerate(FACTORS)))


def event_probability(state: EnvState, probs: FactorProbabilities) -> float:
    p = sum(probs.event[f][getattr(state, f)] for f in RISK_FACTORS)
    return min(max(p, 0.0), 1.0)


def immediate_reward(action: Action, event: bool, weights: RewardWeights,
                     packets: Optional[int] = None, miss_ratio: Optional[float] = None) -> float:
    if action.is_radar:
        if miss_ratio is None or not 0.0 <= miss_ratio <= 1.0:
            raise ContractViolation("radar actions need a miss ratio in [0, 1]")
        return weights.radar_gain * (1.0 - miss_ratio) if event else -weights.radar_cost
    if packets is None:
        raise ContractViolation("communication actions need a packet count")
    return -weights.comm_penalty if event else weights.comm_gain * packets


def packets_delivered(action: Action, channel: int, comm: CommConfig) -> int:
    table = comm.packets_bad if channel else comm.packets_good
    return table[action.level]


def step(state: EnvState, action: Action, config: EnvConfig,
         rng: np.random.Generator) -> StepResult:
    """Advance one slot: event draw, action outcome, reward, next state.

    Random numbers are consumed in that fixed order, so a seeded generator
    reproduces the result exactly.
    """
    event = bool(rng.random() < event_probability(state, config.probs))
    packets, ratio, objects, detected = 0, None, 0, 0
    if action.is_radar:
        mode = config.modes[action.level]
        ratio, objects, detected = radar.sample_miss_ratio(mode, config.density, config.sizes, rng)
    else:
        packets = packets_delivered(action, state.c, config.comm)
    reward = immediate_reward(action, event, config.rewards, packets=packets, miss_ratio=ratio)
    return StepResult(
        reward=reward,
        next_state=sample_state(config.probs, rng),
        event_occurred=event,
        packets_sent=packets,
        miss_ratio=ratio,
        objects=objects,
        detected=detected,
    )


class JRCEnv:
    """Stateful wrapper around :func:`step` with episode bookkeeping."""

    def __init__(self, config: EnvConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self._actions = config.action_space()
        self.state: Optional[EnvState] = None
        self.t = 0
        self.total_steps = 0

    @property
    def n_actions(self) -> int:
        return len(self._actions)

    def reset(self) -> EnvState:
        self.state = sample_state(self.config.probs, self.rng)
        self.t = 0
        return self.state

    def step(self, action_index: int) -> tuple[StepResult, bool]:
        """Returns the step result and whether the episode's time limit is hit."""
        if self.state is None:
            raise ContractViolation("reset() must be called before step()")
        result = step(self.state, self._actions[action_index], self.config, self.rng)
        self.state = result.next_state
        self.t += 1
        self.total_steps += 1
        return result, self.t >= self.config.episode_length


def state_distribution(probs: FactorProbabilities) -> np.ndarray:
    """Stationary probability of each encoded state under i.i.d. factor sampling."""
    out = np.ones(N_STATES)
    for i, s in enumerate(ALL_STATES):
        for f in FACTORS:
            out[i] *= probs.tau0[f] if getattr(s, f) == 0 else 1.0 - probs.tau0[f]
    return out


def expected_reward_table(config: EnvConfig, mode_miss_ratios) -> np.ndarray:
    """Mean immediate reward of every (state, action) with miss ratios held fixed.

    This is the frozen, deterministic counterpart of :func:`step` used to check
    learners against dynamic programming.
    """
    table = np.empty((N_STATES, config.n_actions))
    for i, s in enumerate(ALL_STATES):
        p = event_probability(s, config.probs)
        for a in config.action_space():
            j = a.index(len(config.radar_modes))
            if a.is_radar:
                ratio = mode_miss_ratios[a.level]
                hit = immediate_reward(a, True, config.rewards, miss_ratio=ratio)
                miss = immediate_reward(a, False, config.rewards, miss_ratio=ratio)
            else:
                d = packets_delivered(a, s.c, config.comm)
                hit = immediate_reward(a, True, config.rewards, packets=d)
                miss = immediate_reward(a, False, config.rewards, packets=d)
            table[i, j] = p * hit + (1.0 - p) * miss
    return table


def default_successor(index: int) -> int:
    return (5 * index + 3) % N_STATES


class FrozenEnv:
    """Deterministic variant of the decision process.

    Each (state, action) pays its expected reward under fixed per-mode miss
    ratios and moves to a fixed successor state, so dynamic programming gives
    the exact optimum to compare learners against.
    """

    def __init__(self, config: EnvConfig, mode_miss_ratios, successor=default_successor):
        self.rewards = expected_reward_table(config, mode_miss_ratios)
        self.successor = np.array([successor(i) for i in range(N_STATES)])
        self.transitions = np.zeros((N_STATES, N_STATES))
        self.transitions[np.arange(N_STATES), self.successor] = 1.0

    def step(self, index: int, action: int) -> tuple[float, int]:
        return float(self.rewards[index, action]), int(self.successor[index])
