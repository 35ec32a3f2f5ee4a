"""Command-line front end: run experiments, certify saved runs, emit plot data."""

from __future__ import annotations

import argparse
import sys

from .harness import certify_run, emit_plot_data, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strarc",
        description="Stochastic trust-region / cubic-regularization experiment harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every (problem x scheme x seed) cell of a config")
    run.add_argument("config", help="JSON experiment config")
    run.add_argument("--out", default="runs/latest", help="output directory (traces + summary)")
    run.add_argument("--seed", type=int, default=None, help="replace the config's seed list")
    run.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    certify = sub.add_parser("certify", help="re-run cells, compare saved traces, re-check lemmas")
    certify.add_argument("config", help="JSON experiment config the run was produced from")
    certify.add_argument("--out", default="runs/latest", help="directory holding the saved run")

    plot = sub.add_parser("plotdata", help="emit tidy loss-vs-oracle-calls CSV from saved traces")
    plot.add_argument("rundir", help="directory holding the saved run")
    plot.add_argument("--out", default="plotdata.csv", help="output CSV path")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run_experiment(args.config, args.out, jobs=args.jobs, seed_override=args.seed)
    if args.command == "certify":
        return certify_run(args.config, args.out)
    return emit_plot_data(args.rundir, args.out)


if __name__ == "__main__":
    sys.exit(main())
