"""ops: open-world part segmentation toolkit.

    python3 main.py gen --seed 7 --out data/
    python3 main.py train --data data/ --out runs/base --object-mask perfect
    python3 main.py ops --data data/ --out runs/ops --rounds 2
    python3 main.py infer --checkpoint runs/ops/ckpt_round_2 --data data/ --split test_unseen --out preds.json
    python3 main.py eval --data data/ --split test_unseen --predictions preds.json
    python3 main.py baseline --method felzenszwalb --data data/ --split test_unseen --out fz.json
"""
import sys
import logging
import argparse

import config
from config import OBJECT_MASK_MODES, SPLITS, SPLIT_TEST
from baselines.runner import METHODS
from cli.commands import COMMANDS
from core.errors import OPSError
from pipeline.config import PROTOCOLS, BATCH_SIZE, STAGES, POSTAWARE_MASK_MODES
import experiments.run as experiments_run

logger = logging.getLogger("ops.main")

ON_OFF = ("on", "off")


def _add_data(p, split: bool = True):
    p.add_argument("--data", required=True, help="dataset directory or dataset.json")
    p.add_argument("--strict", action="store_true", help="reject invariant violations instead of fixing them")
    if split:
        p.add_argument("--split", choices=SPLITS, default=SPLIT_TEST)


def _add_model(p):
    p.add_argument("--agnostic", choices=ON_OFF, default="on")
    p.add_argument("--object-mask", choices=OBJECT_MASK_MODES, default="none")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=BATCH_SIZE)
    p.add_argument("--num-queries", type=int, default=16)
    p.add_argument("--embed-dim", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ss", choices=ON_OFF, default="on")
    p.add_argument("--st", choices=ON_OFF, default="on")
    p.add_argument("--protocol", choices=PROTOCOLS, default="transductive")
    p.add_argument("--out", required=True)


def _add_postaware(p):
    p.add_argument("--post-aware", choices=ON_OFF, default="off")
    p.add_argument("--post-mask", choices=POSTAWARE_MASK_MODES, default="perfect",
                   help="post-aware mask for models trained without one")


def _add_inference(p):
    p.add_argument("--object-mask", choices=OBJECT_MASK_MODES, default="none")
    _add_postaware(p)
    p.add_argument("--score-threshold", type=float, default=0.1)
    p.add_argument("--mask-seed", type=int, default=0, help="seed of simulated imperfect masks")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ops", description="Open-world part segmentation toolkit")
    parser.add_argument("--version", action="version", version=f"ops {config.TOOL_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic part dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--n-train", type=int, default=400)
    p.add_argument("--n-unseen", type=int, default=60, help="images per unseen split")
    p.add_argument("--image-size", type=int, default=config.IMAGE_SIZE)

    p = sub.add_parser("train", help="base training, or one fine-tuning round from a checkpoint")
    _add_data(p, split=False)
    _add_model(p)
    p.add_argument("--stage", choices=STAGES, default="base")
    p.add_argument("--checkpoint", default=None)

    p = sub.add_parser("ops", help="base training followed by pseudo-label / fine-tune rounds")
    _add_data(p, split=False)
    _add_model(p)
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--finetune-iterations", type=int, default=None)
    _add_postaware(p)
    p.add_argument("--dump-clusters", action="store_true")
    p.add_argument("--clusters", type=int, default=10, help="K for self-supervised clustering")

    p = sub.add_parser("infer", help="predict parts with a checkpoint")
    _add_data(p)
    _add_inference(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="predictions JSON path")

    p = sub.add_parser("eval", help="score a predictions file or a baseline")
    _add_data(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--predictions")
    src.add_argument("--baseline", choices=METHODS)
    p.add_argument("--params", default=None, help="baseline params, e.g. k=100,min_size=20")
    p.add_argument("--object-mask", choices=("perfect", "imperfect"), default="perfect")
    p.add_argument("--mask-seed", type=int, default=0)
    p.add_argument("--class-aware", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="directory for metrics.json")

    p = sub.add_parser("baseline", help="classical segmentation inside the object mask")
    _add_data(p)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--params", default=None)
    p.add_argument("--object-mask", choices=("perfect", "imperfect"), default="perfect")
    p.add_argument("--mask-seed", type=int, default=0)
    p.add_argument("--grid", action="store_true", help="sweep the default parameter grid and report")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="predictions JSON path")

    p = sub.add_parser("viz", help="overlay panels per image")
    _add_data(p)
    _add_inference(p)
    p.add_argument("--predictions", default=None)
    p.add_argument("--pseudo", default=None, help="pseudo_round_k.json")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--dump-clusters", action="store_true")
    p.add_argument("--limit", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("experiments", help="desk-scale ablations")
    experiments_run.add_arguments(p)
    return parser


def check_args(parser: argparse.ArgumentParser, args):
    """Contradictory flag combinations are usage errors (exit 2)."""
    if args.command in ("train", "ops"):
        finetuning = args.command == "ops" and args.rounds > 0 or getattr(args, "stage", "") == "finetune"
        if finetuning and args.ss == "off" and args.st == "off":
            parser.error("--ss off and --st off leave nothing to fine-tune with")
        if args.iterations is not None and args.iterations < 0:
            parser.error("--iterations must be >= 0")
        if args.command == "train" and args.stage == "finetune" and not args.checkpoint:
            parser.error("--stage finetune needs --checkpoint")
    if args.command == "ops" and args.rounds < 0:
        parser.error("--rounds must be >= 0")
    if args.command == "eval" and args.params and not args.baseline:
        parser.error("--params only applies with --baseline")
    if args.command == "baseline" and not args.grid and not args.out:
        parser.error("baseline needs --out unless --grid is given")
    if args.command == "viz" and args.dump_clusters and not args.checkpoint:
        parser.error("--dump-clusters needs --checkpoint")
    if args.command == "experiments":
        experiments_run.parse_seeds(parser, args.seeds)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    check_args(parser, args)
    logger.info(f"ops {config.TOOL_VERSION}: {args.command} (workers={config.NUM_WORKERS})")
    try:
        return COMMANDS[args.command](args)
    except (OPSError, OSError) as e:
        logger.error(f"{args.command} failed: {e}", exc_info=logger.isEnabledFor(logging.DEBUG))
        return 1


if __name__ == "__main__":
    sys.exit(main())
