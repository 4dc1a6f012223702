"""JSON scenario files.

A scenario file has up to five top-level sections::

    {
      "name": "target",
      "env":   {"event_probs": {...}, "tau0": 0.7, "density": 27, ...},
      "train": {"gamma": 0.99, "batch_size": 64, ...},
      "tlwd":  {"n": 10, "pretrain_steps": 10000, ...},
      "metrics": {"pk_rule": "event"}
    }

Keys mirror the dataclass field names; anything unrecognised is rejected.
"""
from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field, fields, replace
from importlib import resources

from .agents.common import TLwDConfig, TrainConfig
from .env import FACTORS, CommConfig, EnvConfig, FactorProbabilities, RewardWeights
from .errors import ConfigError
from .radar import ChirpConfig, SizeDistributions

BUILTIN = ("source", "target")
PK_RULES = ("event", "radar")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    env: EnvConfig
    train: TrainConfig = field(default_factory=TrainConfig)
    tlwd: TLwDConfig = field(default_factory=TLwDConfig)
    pk_rule: str = "event"

    def __post_init__(self):
        if self.pk_rule not in PK_RULES:
            raise ConfigError(f"pk_rule must be one of {PK_RULES}")


def _check_keys(section: dict, allowed, where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _build(cls, section: dict, where: str, **converters):
    _check_keys(section, [f.name for f in fields(cls)], where)
    kwargs = {k: converters[k](v) if k in converters else v for k, v in section.items()}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


_ENV_KEYS = ("event_probs", "tau0", "density", "rewards", "comm", "radar_modes", "sizes",
             "episode_length")


def env_from_dict(doc: dict) -> EnvConfig:
    _check_keys(doc, _ENV_KEYS, "env")
    for key in ("event_probs", "tau0"):
        if key not in doc:
            raise ConfigError(f"env.{key} is required")
    tau0 = doc["tau0"]
    if isinstance(tau0, (int, float)):
        tau0 = {f: float(tau0) for f in FACTORS}
    probs = FactorProbabilities(
        event={f: tuple(float(p) for p in pair) for f, pair in doc["event_probs"].items()},
        tau0={f: float(t) for f, t in tau0.items()},
    )
    kwargs = {"probs": probs}
    if "rewards" in doc:
        kwargs["rewards"] = _build(RewardWeights, doc["rewards"], "env.rewards")
    if "comm" in doc:
        kwargs["comm"] = _build(CommConfig, doc["comm"], "env.comm",
                                packets_good=tuple, packets_bad=tuple)
    if "radar_modes" in doc:
        kwargs["radar_modes"] = tuple(
            _build(ChirpConfig, m, f"env.radar_modes[{k}]") for k, m in enumerate(doc["radar_modes"]))
    if "sizes" in doc:
        kwargs["sizes"] = _build(SizeDistributions, doc["sizes"], "env.sizes",
                                 car_length=tuple, car_width=tuple, ped_length=tuple,
                                 ped_width=tuple)
    for key in ("density", "episode_length"):
        if key in doc:
            kwargs[key] = doc[key]
    return EnvConfig(**kwargs)


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    _check_keys(doc, ("name", "env", "train", "tlwd", "metrics"), "config")
    if "env" not in doc:
        raise ConfigError("config needs an env section")
    metrics = doc.get("metrics", {})
    _check_keys(metrics, ("pk_rule",), "metrics")
    return ScenarioConfig(
        name=str(doc.get("name", "custom")),
        env=env_from_dict(doc["env"]),
        train=_build(TrainConfig, doc.get("train", {}), "train"),
        tlwd=_build(TLwDConfig, doc.get("tlwd", {}), "tlwd"),
        pk_rule=metrics.get("pk_rule", "event"),
    )


def builtin_dict(name: str) -> dict:
    if name not in BUILTIN:
        raise ConfigError(f"no built-in scenario {name!r}; choose from {BUILTIN}")
    text = resources.files("jrcdrl.scenarios").joinpath(f"{name}.json").read_text()
    return json.loads(text)


def load_dict(path_or_name: str) -> dict:
    if path_or_name in BUILTIN and not os.path.exists(path_or_name):
        return builtin_dict(path_or_name)
    try:
        with open(path_or_name) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path_or_name}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path_or_name}: invalid JSON ({exc})") from exc


def load_scenario(path_or_name: str) -> ScenarioConfig:
    """Load a scenario from a JSON file, or one of the built-in names."""
    return scenario_from_dict(load_dict(path_or_name))


def override(doc: dict, section: str, **values) -> dict:
    """Deep-copied config dict with ``values`` merged into ``section``."""
    out = copy.deepcopy(doc)
    out.setdefault(section, {}).update(values)
    return out


def with_train(cfg: ScenarioConfig, **values) -> ScenarioConfig:
    return replace(cfg, train=replace(cfg.train, **values))


def with_tlwd(cfg: ScenarioConfig, **values) -> ScenarioConfig:
    return replace(cfg, tlwd=replace(cfg.tlwd, **values))
