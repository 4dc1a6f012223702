# %% [markdown]
# # Transfer to the target environment
#
# A DDQN trained on the source road provides two things: its weights, which
# direct policy reuse (DPR) starts from, and demonstrations, which transfer
# learning with demonstrations (TLwD) pre-trains on and keeps replaying.

# %%
import os
import tempfile

import numpy as np

from jrcdrl import harness
from jrcdrl.config import load_scenario, with_tlwd, with_train

work = tempfile.mkdtemp()
source = with_train(load_scenario("source"), episodes=40, eps_decay=0.9)
src = harness.train(harness.Scenario(source, "ddqn", seed=0), out_dir=os.path.join(work, "src"))
weights = os.path.join(work, "src", "weights.json")
demos = harness.collect_demos(src.agent.online, source, seed=0, count=5000)
print("demonstrations:", len(demos))

# %%
target = with_tlwd(with_train(load_scenario("target"), episodes=40, eps_decay=0.9,
                              demo_size=5000), pretrain_steps=2000)
for kind in ("tlwd", "dpr", "ddqn"):
    run = harness.train(harness.Scenario(target, kind, seed=0, source_weights=weights,
                                         demos=demos))
    r = np.array([rec.avg_reward for rec in run.history])
    print(f"{kind:5s} first 5 episodes {r[:5].mean():6.3f}   last 10 {r[-10:].mean():6.3f}")
