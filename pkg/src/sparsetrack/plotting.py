"""Single-figure SVG rendering of a :class:`~sparsetrack.bench.RunResult`."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_result(result, path) -> None:
    """One line per solver (or the empirical/theory pair for detection runs)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if result.experiment == "detect-prob-vs-snr":
        x = [r["snr_db"] for r in result.rows]
        ax.plot(x, [r["empirical_prob"] for r in result.rows], "o-", label="D-OMP (Monte Carlo)")
        ax.plot(x, [r["theory_eq12"] for r in result.rows], "k--", label="closed form")
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("persistent-tap detection probability")
    else:
        xkey = "slot" if result.experiment == "mse-vs-time" else "snr_db"
        seen = []
        for r in result.rows:
            key = (r["solver"], r["snr_db"]) if xkey == "slot" else r["solver"]
            if key not in seen:
                seen.append(key)
        for key in seen:
            if xkey == "slot":
                rows = result.select(solver=key[0], snr_db=key[1])
                label = f"{key[0]} ({key[1]:.1f} dB)"
            else:
                rows = result.select(solver=key)
                label = key
            ax.plot([r[xkey] for r in rows], [r["mse_db"] for r in rows], label=label)
        ax.set_xlabel("time slot" if xkey == "slot" else "SNR (dB)")
        ax.set_ylabel("normalised MSE (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "sparsetrack"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
