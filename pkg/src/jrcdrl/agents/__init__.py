"""Learners: tabular Q-learning, double DQN, direct policy reuse and
transfer learning with demonstrations."""
from ..replay import n_step_return
from .common import ExplorationSchedule, TLwDConfig, TrainConfig, epsilon_greedy
from .ddqn import DDQNAgent, ddqn_target, ddqn_train_step, double_bootstrap, dpr_initialize
from .tabular import QLearningAgent, QTable, q_learning_update, value_iteration
from .tlwd import TLwDAgent, collect_demonstrations, pretrain, tlwd_loss

__all__ = [
    "ExplorationSchedule", "TLwDConfig", "TrainConfig", "epsilon_greedy",
    "DDQNAgent", "ddqn_target", "ddqn_train_step", "double_bootstrap", "dpr_initialize",
    "QLearningAgent", "QTable", "q_learning_update", "value_iteration",
    "TLwDAgent", "collect_demonstrations", "pretrain", "tlwd_loss", "n_step_return",
]
