"""Deep reinforcement learning for joint radar-communication scheduling.

Submodules: ``radar`` (chirp geometry and detection clustering), ``env``
(the 32-state decision process), ``nn`` (a small numpy MLP), ``replay``
(uniform and prioritized buffers, n-step returns, demonstrations),
``agents`` (Q-learning, DDQN, DPR, TLwD) and ``harness`` (training runs,
sweeps and CSV output).
"""
from . import agents, config, env, harness, nn, radar, replay
from .config import load_scenario
from .errors import (ConfigError, ContractViolation, JRCError, NotReady, ShapeMismatch,
                     VersionMismatch, WeightFileError, WeightFileMissing)

__version__ = "0.1.0"

__all__ = ["agents", "config", "env", "harness", "nn", "radar", "replay", "load_scenario",
           "ConfigError", "ContractViolation", "JRCError", "NotReady", "ShapeMismatch",
           "VersionMismatch", "WeightFileError", "WeightFileMissing"]
