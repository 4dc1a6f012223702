# %% [markdown]
# # Learning in the source environment
#
# Tabular Q-learning and double DQN on the dense, risky source road. The
# budget is kept small so the script finishes in a couple of minutes; raise
# ``EPISODES`` for the full 400-episode run.

# %%
import numpy as np

from jrcdrl import harness
from jrcdrl.config import load_scenario, with_train

EPISODES = 60
cfg = with_train(load_scenario("source"), episodes=EPISODES, eps_decay=0.93)

runs = {kind: harness.train(harness.Scenario(cfg, kind, seed=0))
        for kind in ("qlearning", "ddqn")}
for kind, run in runs.items():
    r = [rec.avg_reward for rec in run.history]
    print(f"{kind:9s} first 10: {np.mean(r[:10]):7.3f}   last 10: {np.mean(r[-10:]):7.3f}")

# %% [markdown]
# Greedy actions per state (0 long radar, 1 short radar, 2 low rate, 3 high rate).

# %%
for kind, run in runs.items():
    print(kind, run.agent.greedy_actions())
