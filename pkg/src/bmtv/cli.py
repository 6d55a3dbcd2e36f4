"""``bmtv <subcommand> --config FILE [--seed S] [--out DIR] [--threads K]``."""

from __future__ import annotations

import argparse
import sys
import traceback

from . import experiments
from .errors import BMTVError, ConfigInvalid


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bmtv", description="Breuer-Major total variation rate experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in experiments.EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--seed", type=int, help="override mc.seed (unsigned 64-bit)")
        p.add_argument("--out", help="override output.path")
        p.add_argument("--threads", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        flat = experiments.load_config(args.config)
        if flat.setdefault("experiment", args.command) != args.command:
            raise ConfigInvalid(f"experiment: config is for {flat['experiment']!r}, not {args.command!r}")
        if args.seed is not None:
            flat["mc.seed"] = args.seed
        if args.out is not None:
            flat["output.path"] = args.out
        for dg in experiments.validate(flat):
            print(dg, file=sys.stderr)
        if args.threads < 1:
            raise ConfigInvalid("threads: must be >= 1")
        res = experiments.run(flat, threads=args.threads)
    except (BMTVError, OSError, ValueError) as ex:
        print(f"error: {type(ex).__name__}: {ex}", file=sys.stderr)
        return experiments.EXIT_ERROR
    except Exception:  # pragma: no cover
        traceback.print_exc()
        return experiments.EXIT_ERROR
    print(f"{res.csv_path}\n{res.summary_path}")
    if res.exit_code:
        print("check failed", file=sys.stderr)
    return res.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
