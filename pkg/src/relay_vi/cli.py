"""Command line entry point: ``simulate`` and ``selftest``."""

import argparse
import json
import logging
import sys
from pathlib import Path

from .harness import ExperimentConfig, run_experiment, write_csv, write_reference_csv


def build_parser():
    parser = argparse.ArgumentParser(
        prog="relay-vi",
        description="Joint channel estimation and detection for OFDM relay networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte Carlo experiment and write a CSV")
    sim.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    sim.add_argument("--preset", choices=["dualhop", "threehop"],
                     help="start from a built-in relay topology")
    sim.add_argument("--runs", type=int, help="Monte Carlo runs per SNR")
    sim.add_argument("--snr", type=float, action="append", help="SNR in dB (repeatable)")
    sim.add_argument("--iters", type=int, help="iterations per run")
    sim.add_argument("--seed", type=int, help="master seed")
    sim.add_argument("--workers", type=int, help="worker processes (default: all CPUs)")
    sim.add_argument("--out", type=Path, help="CSV output path")
    sim.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    sim.add_argument("-q", "--quiet", action="store_true")

    test = sub.add_parser("selftest", help="run the built-in oracle checks")
    test.add_argument("--seed", type=int, default=0)
    return parser


def config_from_args(args):
    data = {}
    if args.config is not None:
        with open(args.config) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
    if args.preset:
        data["preset"] = args.preset
    overrides = {"n_runs": args.runs, "snr_db": args.snr, "n_iters": args.iters,
                 "seed": args.seed, "workers": args.workers,
                 "output": str(args.out) if args.out else None}
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)


def simulate(args):
    try:
        config = config_from_args(args)
    except (ValueError, TypeError, OSError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2

    def progress(done, total):
        if not args.quiet:
            print(f"\r{done}/{total} runs", end="", file=sys.stderr, flush=True)

    result = run_experiment(config, progress)
    if not args.quiet:
        print(file=sys.stderr)
    out = Path(config.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(result.records, out)
    ref = out.with_name(f"{out.stem}_perfect_csi.csv")
    write_reference_csv(result, ref)
    written = [out, ref]
    if not args.no_figures:
        from .plotting import save_report_figures
        written += save_report_figures(result.records, out, result.perfect_csi_ber)
    if not args.quiet:
        for path in written:
            print(path)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "selftest":
        from .selftest import run_selftest
        return 0 if run_selftest(args.seed) else 1
    return simulate(args)


if __name__ == "__main__":
    sys.exit(main())
