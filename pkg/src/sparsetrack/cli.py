"""``sparsetrack`` command line: run experiments, evaluate closed forms."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .analysis import SnrSetting, p_detect_persistent, sigma_n_for_snr, threshold_from_snr
from .bench import PRESETS, ConfigError, emit_results, load_config, run_experiment
from .channel import ModelParams, ParameterError
from .pursuit import compute_threshold


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits: {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsetrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV results")
    run.add_argument("--config", help="JSON experiment config (fields of ExperimentConfig)")
    run.add_argument("--seed", type=_u64, help="override the master seed")
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.add_argument("--plot", action="store_true", help="also write curves.svg")
    run.add_argument("--preset", choices=sorted(PRESETS), help="base parameter profile")
    run.add_argument("--unnormalized", action="store_true",
                     help="report error power instead of error relative to channel power")

    an = sub.add_parser("analyze", help="print a closed-form threshold or detection probability")
    an.add_argument("--formula", required=True, choices=["eq9", "eq11", "eq12"],
                    help="eq9: threshold from sigma_n; eq11: threshold from SNR; "
                         "eq12: persistent-tap detection probability")
    an.add_argument("--m", type=int, required=True)
    an.add_argument("--n", type=int, required=True)
    an.add_argument("--k", type=float, required=True)
    an.add_argument("--gamma-db", type=float, required=True)
    an.add_argument("--alpha", type=float, default=3.0)
    an.add_argument("--sigma-h", type=float, default=1.0)
    an.add_argument("--sigma-phi", type=float, default=1.0)
    an.add_argument("--sigma-n", type=float,
                    help="noise std for eq9; derived from --gamma-db and --k when omitted")
    return parser


def _analyze(args) -> float:
    setting = SnrSetting(gamma_db=args.gamma_db, K=args.k, M=args.m, N=args.n,
                         sigma_h=args.sigma_h, sigma_phi=args.sigma_phi, alpha=args.alpha)
    if args.formula == "eq11":
        return threshold_from_snr(setting)
    if args.formula == "eq12":
        return p_detect_persistent(setting)
    params = ModelParams(N=args.n, M=args.m, sigma_h=args.sigma_h, sigma_phi=args.sigma_phi,
                         alpha=args.alpha, p1=min(1.0, args.k / args.n))
    sigma_n = args.sigma_n if args.sigma_n is not None else sigma_n_for_snr(args.gamma_db, params, args.k)
    return compute_threshold(params.replace(sigma_n=sigma_n))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            print(f"{_analyze(args):.9g}")
            return 0
        config = load_config(args.config, preset=args.preset)
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.out is not None:
            changes["output_dir"] = args.out
        if changes:
            config = config.replace(**changes)
        result = run_experiment(config, normalized=not args.unnormalized)
        for path in emit_results(result, config.output_dir, plot=args.plot):
            print(path)
        return 0
    except (ConfigError, ParameterError) as exc:
        print(f"sparsetrack: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"sparsetrack: I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
