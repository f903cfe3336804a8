"""Seeded Monte-Carlo experiments and result files.

Three experiments are supported:

``mse-vs-time``
    Normalised MSE and support precision/recall per slot for every solver,
    optionally with scripted support events.
``mse-vs-snr``
    The same metrics averaged over slots, swept over an SNR grid.
``detect-prob-vs-snr``
    Fraction of persistent taps that survive D-OMP's pruning step, next to
    the closed-form prediction.

Random streams
--------------
Trial ``i`` of a run with master seed ``S`` draws its channel, matrix and
noise from ``SeedSequence(S, spawn_key=(i, k))`` with ``k = 0, 1, 2``
respectively. Streams therefore depend only on ``(S, i)``: adding trials never
changes earlier ones, and every SNR point of a sweep sees the same channel,
matrix and (unit-power) noise realisations.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .analysis import SnrSetting, p_detect_persistent, sigma_n_for_snr, snr_of
from .channel import ChannelEvent, ModelParams, ParameterError, complex_normal, simulate
from .measurement import gen_matrix, measure
from .pursuit import (
    OpCounters,
    TrackerState,
    compute_threshold,
    domp_step,
    domp_track,
    linear_ls_solve,
    omp_solve,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RunResult",
    "PRESETS",
    "MSE_FLOOR_DB",
    "trial_rng",
    "compute_mse",
    "support_metrics",
    "run_experiment",
    "detect_prob_experiment",
    "emit_results",
    "load_config",
]

EXPERIMENTS = ("mse-vs-time", "detect-prob-vs-snr", "mse-vs-snr")
SOLVERS = ("domp", "omp", "linear")
MSE_FLOOR_DB = -300.0

MSE_COLUMNS = ["solver", "snr_db", "slot", "mse_db", "precision", "recall", "trials"]
DETECT_COLUMNS = ["snr_db", "empirical_prob", "theory_eq12", "trials"]
COUNTER_COLUMNS = ["solver", "snr_db", "trials", "complex_mults", "ls_solves", "correlations"]


class ConfigError(ValueError):
    """Invalid experiment configuration; the message starts with the field path."""


def _version() -> str:
    from . import __version__

    return f"sparsetrack {__version__}"


PRESETS: dict[str, dict[str, Any]] = {
    "desk": {"params": dataclasses.asdict(ModelParams.stationary(N=200, M=100, T=120)), "trials": 100},
    "paper": {"params": dataclasses.asdict(ModelParams.stationary(N=400, M=200, T=120)), "trials": 100},
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "mse-vs-time"
    params: ModelParams = field(default_factory=lambda: ModelParams.stationary(N=200, M=100, T=120))
    snr_grid_db: tuple[float, ...] = ()
    trials: int = 100
    seed: int = 0
    solvers: tuple[str, ...] = SOLVERS
    events: tuple[ChannelEvent, ...] = ()
    cold_start: bool = False
    output_dir: str = "results"

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(_parse_snr(g, f"snr_grid_db[{k}]") for k, g in enumerate(self.snr_grid_db)))
        object.__setattr__(self, "solvers", tuple(self.solvers))
        object.__setattr__(self, "events", tuple(self.events))
        self.validate()

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment: expected one of {EXPERIMENTS}, got {self.experiment!r}")
        if not isinstance(self.params, ModelParams):
            raise ConfigError("params: expected ModelParams")
        if isinstance(self.trials, bool) or not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError(f"trials: must be an integer >= 1, got {self.trials!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed: must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.experiment != "mse-vs-time" and not self.snr_grid_db:
            raise ConfigError("snr_grid_db: must be non-empty for SNR sweeps")
        if self.experiment != "detect-prob-vs-snr":
            if not self.solvers:
                raise ConfigError("solvers: must be non-empty")
            for k, s in enumerate(self.solvers):
                if s not in SOLVERS:
                    raise ConfigError(f"solvers[{k}]: unknown solver {s!r}")
        for k, ev in enumerate(self.events):
            if not isinstance(ev, ChannelEvent):
                raise ConfigError(f"events[{k}]: expected ChannelEvent")
            if ev.slot > self.params.T:
                raise ConfigError(f"events[{k}].slot: {ev.slot} is past T={self.params.T}")
            if any(not 0 <= i < self.params.N for i in ev.indices):
                raise ConfigError(f"events[{k}].indices: out of range [0, {self.params.N})")
        if self.params.K < 1 and (self.experiment != "mse-vs-time" or "omp" in self.solvers or self.cold_start):
            raise ConfigError(f"params.p1: sparsity N*p1={self.params.K} must be >= 1")

    @property
    def K(self) -> int:
        """Integer sparsity used by OMP and cold start."""
        return max(1, int(round(self.params.K)))

    @classmethod
    def from_dict(cls, data: dict, base: Optional[dict] = None) -> "ExperimentConfig":
        """Build a config from JSON-like data, rejecting unknown fields.

        ``base`` (for instance a preset) supplies values for missing fields;
        ``params`` is merged key by key.
        """
        if not isinstance(data, dict):
            raise ConfigError("<root>: expected a JSON object")
        merged = dict(base or {})
        allowed = {f.name for f in dataclasses.fields(cls)}
        for key, value in data.items():
            if key not in allowed:
                raise ConfigError(f"{key}: unknown field")
            if key == "params" and isinstance(value, dict) and isinstance(merged.get("params"), dict):
                merged["params"] = {**merged["params"], **value}
            else:
                merged[key] = value

        kwargs: dict[str, Any] = {}
        for key, value in merged.items():
            if key == "params":
                kwargs[key] = _params_from_dict(value)
            elif key == "events":
                if not isinstance(value, list):
                    raise ConfigError("events: expected a list")
                kwargs[key] = tuple(_event_from_dict(ev, f"events[{k}]") for k, ev in enumerate(value))
            elif key in ("snr_grid_db", "solvers"):
                if not isinstance(value, (list, tuple)):
                    raise ConfigError(f"{key}: expected a list")
                kwargs[key] = tuple(value)
            elif key == "cold_start":
                if not isinstance(value, bool):
                    raise ConfigError("cold_start: expected a boolean")
                kwargs[key] = value
            else:
                kwargs[key] = value
        try:
            return cls(**kwargs)
        except ParameterError as exc:
            raise ConfigError(f"params: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params.to_dict(),
            "snr_grid_db": [_snr_json(g) for g in self.snr_grid_db],
            "trials": self.trials,
            "seed": self.seed,
            "solvers": list(self.solvers),
            "events": [ev.to_dict() for ev in self.events],
            "cold_start": self.cold_start,
            "output_dir": self.output_dir,
        }

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _parse_snr(value, path: str) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number or 'inf', got {value!r}")
    if math.isnan(value) or value == -math.inf:
        raise ConfigError(f"{path}: must be finite or +inf")
    return float(value)


def _snr_json(g: float):
    return "inf" if g == math.inf else g


def _params_from_dict(value) -> ModelParams:
    if isinstance(value, ModelParams):
        return value
    if not isinstance(value, dict):
        raise ConfigError("params: expected an object")
    allowed = {f.name for f in dataclasses.fields(ModelParams)}
    for key in value:
        if key not in allowed:
            raise ConfigError(f"params.{key}: unknown field")
    try:
        return ModelParams(**value)
    except ParameterError as exc:
        raise ConfigError(f"params: {exc}") from exc


def _event_from_dict(value, path: str) -> ChannelEvent:
    if isinstance(value, ChannelEvent):
        return value
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected an object")
    allowed = {"slot", "kind", "indices", "count"}
    for key in value:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown field")
    try:
        return ChannelEvent(
            slot=int(value["slot"]),
            kind=value["kind"],
            indices=tuple(value.get("indices", ())),
            count=int(value.get("count", 0)),
        )
    except KeyError as exc:
        raise ConfigError(f"{path}.{exc.args[0]}: missing field") from exc
    except ParameterError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(path, preset: Optional[str] = None) -> ExperimentConfig:
    base = PRESETS[preset] if preset else None
    if path is None:
        return ExperimentConfig.from_dict({}, base=base)
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<root>: {path} is not valid JSON ({exc})") from exc
    return ExperimentConfig.from_dict(data, base=base)


@dataclass
class RunResult:
    """Aggregated metrics of one experiment.

    ``rows`` follow the CSV schema of the experiment; ``counters`` hold
    operation totals per (solver, snr). ``trial_metrics`` keeps one summary
    per (trial, solver, snr) and is not written to disk.
    """

    experiment: str
    rows: list[dict] = field(default_factory=list)
    counters: list[dict] = field(default_factory=list)
    trial_metrics: list[dict] = field(default_factory=list)
    config: Optional[ExperimentConfig] = None
    version: str = field(default_factory=_version)

    @property
    def columns(self) -> list[str]:
        return DETECT_COLUMNS if self.experiment == "detect-prob-vs-snr" else MSE_COLUMNS

    def select(self, **match) -> list[dict]:
        return [r for r in self.rows if all(r.get(k) == v for k, v in match.items())]


def trial_rng(seed: int, trial: int, stream: int) -> np.random.Generator:
    """Random generator for ``stream`` (0 channel, 1 matrix, 2 noise) of a trial."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial, stream)))


def compute_mse(estimate: np.ndarray, truth: np.ndarray, normalized: bool = True) -> float:
    """Normalised MSE in dB, ``10 log10(||est - truth||^2 / ||truth||^2)``.

    A zero error maps to :data:`MSE_FLOOR_DB`. When ``truth`` is all zero (or
    ``normalized=False``) the unnormalised ``10 log10 ||est - truth||^2`` is
    returned instead; use :func:`mse_is_normalized` to tell the cases apart.
    """
    estimate = np.asarray(estimate)
    truth = np.asarray(truth)
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    err = float(np.sum(np.abs(estimate - truth) ** 2))
    power = float(np.sum(np.abs(truth) ** 2))
    if normalized and power > 0:
        ratio = err / power
    else:
        ratio = err
    if ratio <= 0:
        return MSE_FLOOR_DB
    return max(MSE_FLOOR_DB, 10.0 * math.log10(ratio))


def mse_is_normalized(truth: np.ndarray, normalized: bool = True) -> bool:
    return bool(normalized and np.any(np.asarray(truth) != 0))


def support_metrics(estimated: Iterable[int], truth: Iterable[int]) -> tuple[float, float]:
    """Support precision and recall; an empty set scores 1 on its own side."""
    est, tru = set(int(i) for i in estimated), set(int(i) for i in truth)
    hits = len(est & tru)
    precision = hits / len(est) if est else 1.0
    recall = hits / len(tru) if tru else 1.0
    return precision, recall


def _noise_sigma(config: ExperimentConfig, gamma_db: Optional[float]) -> float:
    if gamma_db is None:
        return config.params.sigma_n
    if gamma_db == math.inf:
        return 0.0
    return sigma_n_for_snr(gamma_db, config.params)


def _snr_points(config: ExperimentConfig) -> list[Optional[float]]:
    if config.snr_grid_db:
        return list(config.snr_grid_db)
    return [None]


def _trial_estimates(config: ExperimentConfig, trial: int, snrs: Sequence[Optional[float]]):
    """Yield ``(snr, H, {solver: (estimates, counters)})`` for one trial."""
    p = config.params
    states = simulate(p, trial_rng(config.seed, trial, 0), config.events)
    H = np.stack([st.h for st in states])
    sys = gen_matrix(p, trial_rng(config.seed, trial, 1))
    unit_noise = complex_normal(trial_rng(config.seed, trial, 2), 1.0, (p.T, p.M))
    clean = measure(sys, H, 0.0).y
    K = config.K
    for gamma in snrs:
        sigma_n = _noise_sigma(config, gamma)
        Y = clean + sigma_n * unit_noise
        run_params = p.replace(sigma_n=sigma_n)
        out = {}
        for solver in config.solvers:
            counters = OpCounters()
            if solver == "domp":
                track = domp_track(sys, Y, compute_threshold(run_params), counters,
                                   cold_start=config.cold_start, K=K)
                est = np.stack([tr.estimate for tr in track])
            elif solver == "omp":
                est = np.stack([omp_solve(sys, y, K, counters) for y in Y])
            else:
                est = linear_ls_solve(sys, Y, counters)
            out[solver] = (est, counters)
        yield gamma, H, out


def _fmt_snr(gamma: Optional[float], config: ExperimentConfig) -> float:
    return snr_of(config.params) if gamma is None else gamma


def run_experiment(config: ExperimentConfig, normalized: bool = True) -> RunResult:
    """Run the configured experiment and aggregate over trials.

    Per slot, the normalised MSE pools error and channel power over trials
    (``10 log10(sum err / sum power)``), so trials with an empty channel are
    handled without special cases. SNR sweeps report the mean over slots of
    those per-slot values in dB. Precision and recall are plain means.

    ``normalized=False`` reports the mean error power per trial,
    ``10 log10(sum err / trials)``, instead.
    """
    if config.experiment == "detect-prob-vs-snr":
        return detect_prob_experiment(config)

    p = config.params
    snrs = _snr_points(config)
    shape = (len(config.solvers), len(snrs), p.T)
    err = np.zeros(shape)
    power = np.zeros((len(snrs), p.T))
    prec = np.zeros(shape)
    rec = np.zeros(shape)
    counters = {(s, g): OpCounters() for s in range(len(config.solvers)) for g in range(len(snrs))}
    result = RunResult(experiment=config.experiment, config=config)

    for trial in range(config.trials):
        for g, (gamma, H, out) in enumerate(_trial_estimates(config, trial, snrs)):
            pw = np.sum(np.abs(H) ** 2, axis=1)
            power[g] += pw
            for s, solver in enumerate(config.solvers):
                est, ctr = out[solver]
                e = np.sum(np.abs(est - H) ** 2, axis=1)
                err[s, g] += e
                counters[s, g] += ctr
                for t in range(p.T):
                    pr, rc = support_metrics(np.flatnonzero(est[t]), np.flatnonzero(H[t]))
                    prec[s, g, t] += pr
                    rec[s, g, t] += rc
                total_pw = pw.sum()
                result.trial_metrics.append({
                    "trial": trial,
                    "solver": solver,
                    "snr_db": _fmt_snr(gamma, config),
                    "mse_db": _ratio_db(e.sum(), total_pw if normalized else 1.0),
                })

    n = config.trials
    denom = np.broadcast_to(power, shape) if normalized else np.full(shape, float(n))
    mse_slot = np.vectorize(_ratio_db)(err, denom)
    for s, solver in enumerate(config.solvers):
        for g, gamma in enumerate(snrs):
            snr_db = _fmt_snr(gamma, config)
            if config.experiment == "mse-vs-time":
                for t in range(p.T):
                    result.rows.append({
                        "solver": solver, "snr_db": snr_db, "slot": t + 1,
                        "mse_db": mse_slot[s, g, t],
                        "precision": prec[s, g, t] / n, "recall": rec[s, g, t] / n, "trials": n,
                    })
            else:
                result.rows.append({
                    "solver": solver, "snr_db": snr_db, "slot": 0,
                    "mse_db": float(np.mean(mse_slot[s, g])),
                    "precision": float(np.mean(prec[s, g])) / n,
                    "recall": float(np.mean(rec[s, g])) / n, "trials": n,
                })
            result.counters.append({"solver": solver, "snr_db": snr_db, "trials": n, **counters[s, g].as_dict()})
    return result


def _ratio_db(err: float, power: float) -> float:
    if err <= 0:
        return MSE_FLOOR_DB
    ratio = err / power if power > 0 else err
    return max(MSE_FLOOR_DB, 10.0 * math.log10(ratio))


def detect_prob_experiment(config: ExperimentConfig) -> RunResult:
    """Empirical persistent-tap retention against the closed form.

    Each trial places ``K = round(N p1)`` taps at random positions with real
    Gaussian gains ``N(0, sigma_h^2)``, hands D-OMP a tracker that already
    holds the exact channel, and runs one slot. A tap counts as detected when
    it is still in the support afterwards.
    """
    if config.experiment != "detect-prob-vs-snr":
        raise ConfigError(f"experiment: expected 'detect-prob-vs-snr', got {config.experiment!r}")
    p = config.params
    K = config.K
    result = RunResult(experiment=config.experiment, config=config)
    kept = np.zeros(len(config.snr_grid_db))
    counters = [OpCounters() for _ in config.snr_grid_db]
    for trial in range(config.trials):
        rng_c = trial_rng(config.seed, trial, 0)
        support = np.sort(rng_c.choice(p.N, size=K, replace=False))
        h = np.zeros(p.N, dtype=np.complex128)
        h[support] = p.sigma_h * rng_c.standard_normal(K)
        sys = gen_matrix(p, trial_rng(config.seed, trial, 1))
        unit_noise = complex_normal(trial_rng(config.seed, trial, 2), 1.0, p.M)
        clean = sys.phi @ h
        for g, gamma in enumerate(config.snr_grid_db):
            sigma_n = _noise_sigma(config, gamma)
            p_th = compute_threshold(p.replace(sigma_n=sigma_n))
            prior = TrackerState(support=tuple(int(i) for i in support), estimate=h.copy(), p_th=p_th, t=0)
            post = domp_step(prior, clean + sigma_n * unit_noise, sys, counters[g])
            kept[g] += np.isin(support, post.support_array).sum()
    for g, gamma in enumerate(config.snr_grid_db):
        theory = p_detect_persistent(SnrSetting.from_params(p, gamma, K=K))
        result.rows.append({
            "snr_db": gamma,
            "empirical_prob": kept[g] / (config.trials * K),
            "theory_eq12": theory,
            "trials": config.trials,
        })
        result.counters.append({"solver": "domp", "snr_db": gamma, "trials": config.trials, **counters[g].as_dict()})
    return result


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if value == math.inf:
            return "inf"
        return f"{float(value):.9g}"
    return str(value)


def _write_csv(path: Path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc


def emit_results(result: RunResult, out_dir, plot: bool = False) -> list[Path]:
    """Write ``results.csv``, ``counters.csv``, ``config.json`` and optionally ``curves.svg``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{out}: {exc.strerror or exc}") from exc
    written = []
    path = out / "results.csv"
    _write_csv(path, result.columns, result.rows)
    written.append(path)

    path = out / "counters.csv"
    _write_csv(path, COUNTER_COLUMNS, result.counters)
    written.append(path)

    path = out / "config.json"
    meta = {"config": result.config.to_dict() if result.config else None, "version": result.version}
    try:
        path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    written.append(path)

    if plot and result.rows:
        from .plotting import plot_result

        path = out / "curves.svg"
        plot_result(result, path)
        written.append(path)
    return written
