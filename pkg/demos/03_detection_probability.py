# %% [markdown]
# # Keeping persistent taps
#
# The pruning threshold removes noise but may also drop a weak true tap.
# This compares how often D-OMP keeps a persistent tap with the closed-form
# probability, across SNR.

# %%
from pathlib import Path

from sparsetrack import ExperimentConfig, ModelParams, SnrSetting, emit_results, p_detect_persistent, run_experiment

print("M=200, N=400, K=5, 15 dB:", p_detect_persistent(SnrSetting(gamma_db=15, K=5, M=200, N=400, alpha=3)))

# %%
config = ExperimentConfig(
    experiment="detect-prob-vs-snr",
    params=ModelParams(N=400, M=200, p1=5 / 400),
    snr_grid_db=(0.0, 5.0, 10.0, 15.0, 20.0, 25.0),
    trials=2000,
    seed=7,
)
result = run_experiment(config)
for row in result.rows:
    print(f"{row['snr_db']:5.1f} dB  empirical {row['empirical_prob']:.4f}  closed form {row['theory_eq12']:.4f}")

# %%
emit_results(result, Path(__file__).with_name("figures") / "detect_prob", plot=True)
