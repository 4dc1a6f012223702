"""Training runs, evaluation metrics, parameter sweeps and CSV output."""
from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import nn
from .agents import (DDQNAgent, QLearningAgent, TLwDAgent, collect_demonstrations,
                     dpr_initialize)
from .config import PK_RULES, ScenarioConfig
from .env import FACTORS, FactorProbabilities, JRCEnv
from .errors import ConfigError
from .replay import DemoDataset, load_demos, save_demos

AGENT_KINDS = ("qlearning", "ddqn", "dpr", "tlwd")
EPISODE_COLUMNS = ("scenario", "agent", "seed", "episode", "avg_reward", "throughput",
                   "miss_detection_prob", "epsilon", "steps", "wall_ms")
SWEEP_COLUMNS = ("param_name", "param_value", "agent", "seed_count", "mean_reward",
                 "mean_throughput", "mean_miss_prob")
SWEEP_PARAMS = ("p1v", "tau0", "omega")


@dataclass
class EpisodeRecord:
    scenario: str
    agent: str
    seed: int
    episode: int
    avg_reward: float
    throughput: int
    miss_detection_prob: Optional[float]  # None when no qualifying step occurred
    epsilon: float
    steps: int
    wall_ms: float = 0.0


@dataclass
class StepLog:
    rewards: list = field(default_factory=list)
    packets: list = field(default_factory=list)
    events: list = field(default_factory=list)
    miss: list = field(default_factory=list)
    actions: list = field(default_factory=list)


@dataclass
class Scenario:
    config: ScenarioConfig
    agent: str
    seed: int = 0
    source_weights: Optional[str] = None
    demo_path: Optional[str] = None
    demos: Optional[DemoDataset] = None  # in-memory alternative to demo_path

    @property
    def name(self) -> str:
        return self.config.name

    def validate(self) -> None:
        if self.agent not in AGENT_KINDS:
            raise ConfigError(f"agent must be one of {AGENT_KINDS}")
        if self.agent == "dpr" and not self.source_weights:
            raise ConfigError("dpr needs source weights")
        if self.agent == "dpr" and not os.path.exists(self.source_weights):
            raise ConfigError(f"source weights not found: {self.source_weights}")
        if self.agent == "tlwd" and self.demos is None:
            if not self.demo_path:
                raise ConfigError("tlwd needs demonstration data")
            if not os.path.exists(self.demo_path):
                raise ConfigError(f"demonstration file not found: {self.demo_path}")


@dataclass
class RunResult:
    history: list
    agent: object
    meta: dict


class FixedPolicyAgent:
    """Always plays the same action; useful as a baseline and in tests."""

    kind = "fixed"

    def __init__(self, action: int):
        self.action = action

    def act(self, state, epsilon):
        return self.action

    def observe(self, *args, **kwargs):
        pass

    def end_episode(self, learn=True):
        pass


def miss_detection_probability(events, miss, actions_radar, rule: str = "event") -> Optional[float]:
    """Average per-step miss ratio over the qualifying steps of an episode.

    ``rule="event"`` averages over steps with an unexpected event, charging a
    full miss (1.0) when the agent was communicating; ``rule="radar"`` averages
    the miss ratio over radar steps only.
    """
    vals = []
    for ev, m, is_radar in zip(events, miss, actions_radar):
        if rule == "event":
            if ev:
                vals.append(m if is_radar else 1.0)
        elif is_radar:
            vals.append(m)
    return float(np.mean(vals)) if vals else None


def run_episode(agent, env: JRCEnv, epsilon: Union[float, Callable[[int], float]],
                learn: bool = True, pk_rule: str = "event",
                log: Optional[StepLog] = None) -> dict:
    """Play one episode of ``env.config.episode_length`` steps.

    ``epsilon`` may be a constant or a function of the step index within the
    episode. Returns the episode's average reward, throughput and miss
    detection probability.
    """
    if pk_rule not in PK_RULES:
        raise ConfigError(f"pk_rule must be one of {PK_RULES}")
    log = log if log is not None else StepLog()
    n_radar = len(env.config.radar_modes)
    eps_fn = epsilon if callable(epsilon) else (lambda _t: epsilon)
    state = env.reset()
    done = False
    t = 0
    eps_used = []
    while not done:
        eps = eps_fn(t)
        eps_used.append(eps)
        action = agent.act(state, eps)
        result, done = env.step(action)
        agent.observe(state, action, result.reward, result.next_state, False, learn)
        log.rewards.append(result.reward)
        log.packets.append(result.packets_sent)
        log.events.append(result.event_occurred)
        log.miss.append(result.miss_ratio)
        log.actions.append(action)
        state = result.next_state
        t += 1
    agent.end_episode(learn)
    k = len(log.rewards) - t
    radar_flags = [a < n_radar for a in log.actions[k:]]
    return {
        "avg_reward": float(np.mean(log.rewards[k:])),
        "throughput": int(sum(log.packets[k:])),
        "miss_detection_prob": miss_detection_probability(log.events[k:], log.miss[k:],
                                                          radar_flags, pk_rule),
        "epsilon": float(eps_used[0]),
        "steps": t,
    }


def _rngs(seed: int):
    env_ss, agent_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(env_ss), np.random.default_rng(agent_ss)


def build_agent(scenario: Scenario, rng: np.random.Generator):
    cfg = scenario.config
    n_actions = cfg.env.n_actions
    total_steps = cfg.train.episodes * cfg.env.episode_length
    if scenario.agent == "qlearning":
        return QLearningAgent(n_actions, cfg.train.gamma, rng)
    if scenario.agent == "ddqn":
        return DDQNAgent(n_actions, cfg.train, rng)
    if scenario.agent == "dpr":
        return dpr_initialize(scenario.source_weights, n_actions, cfg.train, rng)
    demos = scenario.demos if scenario.demos is not None else load_demos(scenario.demo_path)
    demos = DemoDataset(demos.transitions[:cfg.train.demo_size], demos.n, demos.gamma)
    return TLwDAgent(n_actions, cfg.train, cfg.tlwd, demos, rng, total_steps=total_steps)


def train(scenario: Scenario, out_dir: Optional[str] = None, record_timing: bool = False,
          progress: Optional[Callable[[EpisodeRecord], None]] = None) -> RunResult:
    """Run one scenario from scratch.

    Prerequisite files are checked before any computation. When ``out_dir``
    is given, ``episodes.csv``, ``run.json`` and (for network agents)
    ``weights.json`` are written there.
    """
    scenario.validate()
    cfg = scenario.config
    env_rng, agent_rng = _rngs(scenario.seed)
    agent = build_agent(scenario, agent_rng)
    env = JRCEnv(cfg.env, env_rng)
    schedule = cfg.train.exploration()
    if isinstance(agent, TLwDAgent):
        agent.pretrain()

    history = []
    steps_done = 0
    for episode in range(cfg.train.episodes):
        start = time.perf_counter()
        offset = steps_done
        stats = run_episode(agent, env, lambda t: schedule.value(episode, offset + t),
                            learn=True, pk_rule=cfg.pk_rule)
        steps_done += stats["steps"]
        wall = (time.perf_counter() - start) * 1e3 if record_timing else 0.0
        rec = EpisodeRecord(cfg.name, scenario.agent, scenario.seed, episode,
                            wall_ms=wall, **stats)
        history.append(rec)
        if progress is not None:
            progress(rec)

    meta = {
        "scenario": cfg.name,
        "agent": scenario.agent,
        "seed": scenario.seed,
        "episodes": cfg.train.episodes,
        "env_steps": env.total_steps,
        "pretrain_steps": getattr(agent, "pretrain_steps", 0),
        "target_syncs": [s for s in getattr(agent, "sync_steps", []) if s > 0],
        "pk_rule": cfg.pk_rule,
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_csv(history, os.path.join(out_dir, "episodes.csv"))
        if hasattr(agent, "online"):
            nn.save(agent.online, os.path.join(out_dir, "weights.json"))
        with open(os.path.join(out_dir, "run.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return RunResult(history, agent, meta)


def collect_demos(params: nn.NetworkParams, config: ScenarioConfig, seed: int,
                  path: Optional[str] = None, count: Optional[int] = None) -> DemoDataset:
    count = config.train.demo_size if count is None else count
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(3)[2])
    demos = collect_demonstrations(params, config.env, count, rng, n=config.tlwd.n,
                                   gamma=config.train.gamma, epsilon=config.train.demo_epsilon)
    if path is not None:
        save_demos(demos, path)
    return demos


# sweeps ---------------------------------------------------------------------

@dataclass
class SweepSpec:
    param: str
    values: Sequence[float]
    agents: Sequence[str] = ("tlwd", "dpr", "ddqn")
    seeds: Sequence[int] = (0,)
    episodes: int = 1000
    average_over: int = 1000  # leading episodes included in each point

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}")
        for v in self.values:
            if self.param in ("p1v", "tau0") and not 0.0 <= v <= 1.0:
                raise ConfigError(f"{self.param} value {v} outside [0, 1]")
            if self.param == "omega" and v <= 0:
                raise ConfigError(f"omega value {v} must be positive")
        for a in self.agents:
            if a not in AGENT_KINDS:
                raise ConfigError(f"unknown agent {a!r}")


def apply_param(config: ScenarioConfig, param: str, value: float) -> ScenarioConfig:
    env = config.env
    if param == "omega":
        env = replace(env, density=float(value))
    elif param == "p1v":
        event = dict(env.probs.event)
        event["v"] = (event["v"][0], float(value))
        env = replace(env, probs=FactorProbabilities(event, dict(env.probs.tau0)))
    elif param == "tau0":
        env = replace(env, probs=FactorProbabilities(dict(env.probs.event),
                                                     {f: float(value) for f in FACTORS}))
    else:
        raise ConfigError(f"unknown sweep parameter {param!r}")
    return replace(config, env=env)


def summarize(history, average_over: int) -> dict:
    head = history[:average_over]
    pks = [r.miss_detection_prob for r in head if r.miss_detection_prob is not None]
    return {
        "reward": float(np.mean([r.avg_reward for r in head])),
        "throughput": float(np.mean([r.throughput for r in head])),
        "miss": float(np.mean(pks)) if pks else math.nan,
    }


def run_sweep(spec: SweepSpec, base: ScenarioConfig, source_weights: Optional[str] = None,
              demo_path: Optional[str] = None, demos: Optional[DemoDataset] = None) -> list[dict]:
    """Fresh training runs for every (value, agent, seed); one row per (value, agent)."""
    base = replace(base, train=replace(base.train, episodes=spec.episodes))
    for agent in spec.agents:
        Scenario(base, agent, 0, source_weights, demo_path, demos).validate()
    rows = []
    for value in spec.values:
        cfg = apply_param(base, spec.param, value)
        for agent in spec.agents:
            per_seed = [summarize(train(Scenario(cfg, agent, seed, source_weights, demo_path,
                                                 demos)).history, spec.average_over)
                        for seed in spec.seeds]
            rows.append({
                "param_name": spec.param,
                "param_value": value,
                "agent": agent,
                "seed_count": len(spec.seeds),
                "mean_reward": float(np.mean([p["reward"] for p in per_seed])),
                "mean_throughput": float(np.mean([p["throughput"] for p in per_seed])),
                "mean_miss_prob": float(np.nanmean([p["miss"] for p in per_seed])),
            })
    return rows


# CSV ------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(records, path, columns: Sequence[str] = EPISODE_COLUMNS) -> None:
    """Write records (dataclasses or dicts) with a fixed column order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for rec in records:
            row = asdict(rec) if hasattr(rec, "__dataclass_fields__") else rec
            writer.writerow([_fmt(row[c]) for c in columns])


def write_sweep_csv(rows, path) -> None:
    write_csv(rows, path, SWEEP_COLUMNS)


_INT_COLUMNS = {"seed", "episode", "throughput", "steps", "seed_count"}
_STR_COLUMNS = {"scenario", "agent", "param_name"}


def read_csv(path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for k, v in row.items():
                if k in _STR_COLUMNS:
                    parsed[k] = v
                elif v == "":
                    parsed[k] = None
                elif k in _INT_COLUMNS:
                    parsed[k] = int(v)
                else:
                    parsed[k] = float(v)
            out.append(parsed)
    return out


def write_long_format(records, path) -> None:
    """Plot-ready file: one (episode, metric, value) row per metric."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("scenario", "agent", "seed", "episode", "metric", "value"))
        for r in records:
            for metric in ("avg_reward", "throughput", "miss_detection_prob"):
                writer.writerow((r.scenario, r.agent, r.seed, r.episode, metric,
                                 _fmt(getattr(r, metric))))
