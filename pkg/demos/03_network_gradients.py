# %% [markdown]
# # A small Q-network and its gradients
#
# The approximator is a plain ReLU network, [5, 24, 24, 4], trained with SGD
# on a weighted squared error. Here the hand-written backward pass is
# checked against central differences.

# %%
import numpy as np

from jrcdrl import nn
from jrcdrl.env import STATE_FEATURES

rng = np.random.default_rng(0)
params = nn.init_params(nn.network_dims(5, 4), rng)
print("layer sizes", params.layer_dims, "parameters", params.n_params())

# %%
idx = rng.integers(32, size=16)
batch = nn.WeightedBatch(STATE_FEATURES[idx], rng.integers(4, size=16),
                         rng.normal(size=16), rng.uniform(0.5, 1.0, size=16))
loss, grads = nn.loss_and_gradients(params, batch)

h = 1e-5
flat = params.flat()
probe = params.copy()


def loss_at(vec):
    probe.set_flat(vec)
    return nn.loss_and_gradients(probe, batch)[0]


numeric = np.empty_like(flat)
for k in range(flat.size):
    step = np.zeros_like(flat)
    step[k] = h
    numeric[k] = loss_at(flat + step) - loss_at(flat - step)
numeric /= 2 * h
err = np.abs(numeric - grads.flat()).max()
print(f"loss {loss:.4f}, max abs gradient difference {err:.2e}")

# %% [markdown]
# A few hundred SGD steps on a fixed regression target.

# %%
y = rng.normal(size=(32, 4))
full = nn.WeightedBatch(np.repeat(STATE_FEATURES, 4, axis=0), np.tile(np.arange(4), 32),
                        y.ravel(), np.ones(128))
for it in range(2001):
    loss, g = nn.loss_and_gradients(params, full)
    nn.sgd_step(params, g, 0.05)
    if it % 500 == 0:
        print(it, round(loss, 4))
