"""Run the ablations and write experiments_report.txt + experiments_results.json.

Usage:
    python3 -m experiments.run [--quick] [--seeds 0,1,2] [--only object_awareness,...] [--out runs/experiments]
"""
import sys
import logging
import argparse

from experiments.ablations import (run_object_awareness, run_agnostic_vs_aware, run_finetune_components,
                                  run_baselines_comparison)
from experiments.report import write_experiments

logger = logging.getLogger("ops.experiments")

EXPERIMENTS = {
    "object_awareness": run_object_awareness,
    "agnostic_vs_aware": run_agnostic_vs_aware,
    "finetune_components": run_finetune_components,
    "baselines_comparison": run_baselines_comparison,
}
DEFAULT_SEEDS = (0, 1, 2)


def run_experiments(seeds=DEFAULT_SEEDS, out_dir: str = "runs/experiments", which=None,
                    quick: bool = False) -> tuple[str, str]:
    names = list(which or EXPERIMENTS)
    unknown = [n for n in names if n not in EXPERIMENTS]
    if unknown:
        raise ValueError(f"unknown experiments {unknown}; choose from {list(EXPERIMENTS)}")
    rows = []
    for name in names:
        logger.info(f"=== {name} (seeds {list(seeds)}{', quick' if quick else ''}) ===")
        rows.extend(EXPERIMENTS[name](seeds, quick=quick))
    return write_experiments(rows, list(seeds), out_dir)


def add_arguments(p: argparse.ArgumentParser):
    p.add_argument("--seeds", default=",".join(str(s) for s in DEFAULT_SEEDS))
    p.add_argument("--only", default=None, help="comma-separated subset of experiments")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--out", default="runs/experiments")


def parse_seeds(parser: argparse.ArgumentParser, text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(","))
    except ValueError:
        parser.error(f"--seeds: expected comma-separated integers, got {text!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="experiments", description="desk-scale ablations")
    add_arguments(parser)
    args = parser.parse_args(argv)
    seeds = parse_seeds(parser, args.seeds)
    which = args.only.split(",") if args.only else None
    report_path, _ = run_experiments(seeds, args.out, which=which, quick=args.quick)
    with open(report_path, "r", encoding="utf-8") as f:
        print(f.read())
    return 0


if __name__ == "__main__":
    sys.exit(main())
