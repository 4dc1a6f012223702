# %% [markdown]
# # Parameter sweeps
#
# A sweep retrains every agent from scratch at each parameter value and
# averages reward, throughput and miss-detection probability over the
# leading episodes. Here: traffic density in the target environment.

# %%
import os
import tempfile

from jrcdrl import harness
from jrcdrl.config import load_scenario, with_train

work = tempfile.mkdtemp()
base = with_train(load_scenario("target"), episodes=10, eps_decay=0.7)
spec = harness.SweepSpec("omega", [10, 27, 54], agents=("qlearning", "ddqn"), seeds=(0, 1),
                         episodes=10, average_over=10)
rows = harness.run_sweep(spec, base)
path = os.path.join(work, "sweep.csv")
harness.write_sweep_csv(rows, path)
print(open(path).read())
