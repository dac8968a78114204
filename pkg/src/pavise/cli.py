"""Command-line entry point.

Three verbs, all driven by the same config format:

  pavise gen    --config cfg --out PREFIX   write the config's synthetic
                                            dataset to PREFIX_X.txt / _y.txt
  pavise run    --config cfg --out out.csv  run the experiment, emit CSV
  pavise verify --config cfg                run quick property checks

Exit codes: 0 success, 1 runtime decode failure or failed verification,
2 config parse error, 3 budget violation, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .cluster import load_config
from .errors import BudgetViolation, ConfigError, IOFailure, PaviseError
from .experiments import run_experiment, verify_config, write_dataset


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pavise",
        description="Byzantine-resilient coded computation experiments",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    gen = sub.add_parser("gen", help="generate the config's synthetic dataset")
    gen.add_argument("--config", required=True)
    gen.add_argument("--out", required=True, help="output file prefix")
    gen.add_argument("--seed-override", type=int, default=None)

    run = sub.add_parser("run", help="run the configured experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True, help="output CSV path")
    run.add_argument("--seed-override", type=int, default=None)

    verify = sub.add_parser("verify", help="run property checks on the config")
    verify.add_argument("--config", required=True)
    verify.add_argument("--out", default=None, help="optional report file")
    verify.add_argument("--seed-override", type=int, default=None)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.verb == "run":
        return run_experiment(args.config, args.out, args.seed_override)

    try:
        settings = load_config(args.config)
        if args.seed_override is not None:
            settings["seed"] = int(args.seed_override)

        if args.verb == "gen":
            n, d = write_dataset(settings["dataset"], settings["seed"], args.out)
            print(f"wrote {n}x{d} dataset to {args.out}_X.txt / {args.out}_y.txt")
            return 0

        ok, lines = verify_config(settings)
        report = "\n".join(lines)
        print(report)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(report + "\n")
        return 0 if ok else 1

    except ConfigError as exc:
        print(f"config-parse-error: {exc}")
        return 2
    except BudgetViolation as exc:
        print(f"budget-violation: {exc}")
        return 3
    except (IOFailure, OSError) as exc:
        print(f"io-error: {exc}")
        return 4
    except PaviseError as exc:
        print(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
