# %% [markdown]
# # The dynamic sparse channel
#
# Tap positions follow a slow two-state Markov chain while the gains of every
# tap take a complex Gaussian random-walk step each slot. With the
# stationary birth probability the expected number of active taps stays at
# ``N * p1``.

# %%
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from sparsetrack import ModelParams, simulate

out = Path(__file__).with_name("figures")
out.mkdir(exist_ok=True)

params = ModelParams.stationary(N=200, M=100, T=120, p1=0.025, p10=0.01)
print(params)
print("expected sparsity K =", params.K)

# %%
states = simulate(params, np.random.default_rng(0))
H = np.stack([st.h for st in states])
print("support sizes over time:", [int(st.s.sum()) for st in states[::10]])

# %%
fig, ax = plt.subplots(figsize=(7, 3.5))
ax.imshow(np.abs(H).T, aspect="auto", origin="lower", cmap="magma")
ax.set_xlabel("time slot")
ax.set_ylabel("tap index")
ax.set_title("|h| over time")
fig.tight_layout()
fig.savefig(out / "channel_model.png", dpi=120)

# %% [markdown]
# Over many chains the average support size stays put.

# %%
from sparsetrack import init_state, step_state

rng = np.random.default_rng(1)
st = init_state(params, rng, batch=5000)
sizes = []
for _ in range(params.T):
    sizes.append(st.s.sum(axis=1).mean())
    st = step_state(st, params, rng)
print("mean |support| at t=1, 60, 120:", sizes[0], sizes[59], sizes[-1])
