# %% [markdown]
# # Tracking over time
#
# D-OMP against per-slot OMP and the minimum-norm linear estimate, with two
# active taps removed at slot 80. D-OMP needs one slot per tap to acquire the
# initial channel, then follows it; the removal is absorbed in the same slot.

# %%
from pathlib import Path

import numpy as np

from sparsetrack import ChannelEvent, ExperimentConfig, ModelParams, emit_results, run_experiment

out = Path(__file__).with_name("figures") / "mse_vs_time"

config = ExperimentConfig(
    experiment="mse-vs-time",
    params=ModelParams.stationary(N=200, M=100, T=120),
    snr_grid_db=(20.0,),
    trials=30,
    seed=2024,
    events=(ChannelEvent(slot=80, kind="force-disappear", count=2),),
)
result = run_experiment(config)

# %%
for solver in config.solvers:
    mse = np.array([r["mse_db"] for r in result.select(solver=solver)])
    print(f"{solver:>6}: slots 20-79 {mse[19:79].mean():6.1f} dB, slots 80-82 {np.round(mse[79:82], 1)}")

# %%
for c in result.counters:
    print(c)

# %%
emit_results(result, out, plot=True)
print("wrote", out)
