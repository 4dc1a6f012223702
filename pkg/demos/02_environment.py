# %% [markdown]
# # The joint radar-communication decision process
#
# Each step the vehicle either senses with one of two radar modes or sends
# data at one of two rates. Five binary factors make up the state: channel,
# road, weather, speed and neighbours. Risky factor values raise the chance
# of an unexpected event. Sensing pays off when an event happens; sending
# during an event is heavily penalised.

# %%
import numpy as np

from jrcdrl import env
from jrcdrl.config import load_scenario

source = load_scenario("source").env
target = load_scenario("target").env

# %% [markdown]
# States encode to an index in [0, 32) and decode back.

# %%
s = env.EnvState(c=1, r=0, w=1, v=0, m=1)
print(s, "->", s.encode(), "->", env.EnvState.decode(s.encode()))

# %% [markdown]
# Event probability of a state is the sum of its per-factor contributions.
# Averaged over the state prior this gives one number per environment.

# %%
for name, cfg in (("source", source), ("target", target)):
    dist = env.state_distribution(cfg.probs)
    p = np.array([env.event_probability(st, cfg.probs) for st in env.ALL_STATES])
    print(f"{name}: mean event probability {dist @ p:.4f}")

# %% [markdown]
# Expected reward of each action with miss ratios held at typical values.
# Radar dominates in every state here, which is worth keeping in mind when
# reading learning curves: the hard part is never choosing comm by mistake.

# %%
for name, cfg, ratios in (("source", source, (0.36, 0.29)), ("target", target, (0.19, 0.15))):
    table = env.expected_reward_table(cfg, ratios)
    dist = env.state_distribution(cfg.probs)
    print(name, "per-action mean reward", np.round(dist @ table, 3))

# %% [markdown]
# A short random rollout.

# %%
rng = np.random.default_rng(1)
sim = env.JRCEnv(target, rng)
state = sim.reset()
for t in range(5):
    a = int(rng.integers(sim.n_actions))
    res, done = sim.step(a)
    print(t, state.encode(), "action", a, "reward", round(res.reward, 2),
          "event", res.event_occurred, "packets", res.packets_sent)
    state = res.next_state
