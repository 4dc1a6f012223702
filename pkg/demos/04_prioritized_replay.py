# %% [markdown]
# # Prioritized replay with protected demonstrations
#
# Transitions are drawn with probability proportional to priority^alpha.
# Demonstrations sit in a region that is never overwritten and carry a
# priority bonus. Fresh transitions enter at the running maximum priority.

# %%
import numpy as np

from jrcdrl.replay import NStepAccumulator, PrioritizedBuffer, Transition

rng = np.random.default_rng(0)
demos = [Transition(k, 1, 1.0, k + 1, is_demo=True, n_step_return=1.0, n_step_state=k + 1,
                    n_step_horizon=1) for k in range(3)]
buf = PrioritizedBuffer(8, alpha=1.0, eps=1e-3, demo_bonus=1.0)
buf.load_demonstrations(demos)
for k in range(20):
    buf.push(Transition(k % 32, 0, 0.0, (k + 1) % 32))
print("stored", len(buf), "demos kept:", all(buf[i].is_demo for i in range(3)))

# %% [markdown]
# Set priorities from TD errors and compare sampling frequencies with the
# closed form.

# %%
td = np.array([0.0, 0.5, 1.0, 0.1, 0.2, 0.4, 2.0, 3.0])
buf.update_priorities(np.arange(8), td)
p = buf.probabilities()
counts = np.zeros(8)
for _ in range(20000):
    counts += np.bincount(buf.sample(8, rng, beta=0.6).indices, minlength=8)
print("expected ", np.round(p, 3))
print("empirical", np.round(counts / counts.sum(), 3))

# %% [markdown]
# n-step summaries are cut from the stream of one-step transitions.

# %%
acc = NStepAccumulator(3, 0.9)
out = []
for t, r in enumerate([1.0, 0.0, 2.0, 1.0]):
    out += acc.add(t, 0, r, t + 1)
out += acc.flush()
for tr in out:
    print(tr.state, "R =", round(tr.n_step_return, 3), "horizon", tr.n_step_horizon,
          "bootstrap from", tr.n_step_state)
