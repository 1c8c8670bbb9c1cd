"""Command implementations. Each cmd_* takes parsed args and returns an exit code."""
import os
import logging

from config import (CKPT_BASE, RUN_CONFIG, RUN_LOG, RUN_METRICS, SPLIT_TRAIN,
                    ckpt_round_name, pseudo_round_name)
from baselines.grid import predict_baseline, run_grid
from baselines.runner import BaselineConfig
from cli.manifest import RunManifest
from cli.predictions import save_predictions, load_predictions
from cli.viz import save_panels
from core.errors import ConfigError
from experiments.run import run_experiments
from metrics.report import full_report, build_report, write_metrics
from objectaware.imperfect import MaskQuality
from pipeline.audit import AccessAudit, audited
from pipeline.config import OPSConfig, TrainConfig
from pipeline.evaluate import predict_split
from pipeline.ops import run_ops, select_splits, cluster_result
from pipeline.pseudo_labels import PseudoLabelSet, generate_pseudo_labels
from pipeline.train import train_base, finetune
from segmodel.checkpoint import save_checkpoint, load_checkpoint
from segmodel.model import ModelConfig
from selfsup.losses import SSConfig
from selfsup.pseudo_parts import label_map
from synthdata.dataset_io import save_dataset, load_dataset
from synthdata.generator import generate, split_samples
from synthdata.templates import default_manifest
from utils.helpers import write_json_atomic

logger = logging.getLogger("ops.cli")


# ---- Helpers ----

def parse_params(text: str | None) -> dict:
    """'k=100,min_size=20' -> {'k': 100, 'min_size': 20}."""
    params = {}
    if not text:
        return params
    for item in text.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise ConfigError(f"bad --params entry {item!r}; expected name=value")
        key, val = (x.strip() for x in item.split("=", 1))
        try:
            params[key] = int(val)
        except ValueError:
            try:
                params[key] = float(val)
            except ValueError:
                raise ConfigError(f"--params {key}: {val!r} is not a number")
    return params


def _args_dict(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _load(args, split: str | None = None):
    samples = load_dataset(args.data, strict=getattr(args, "strict", False))
    split = split or getattr(args, "split", None)
    return split_samples(samples, split) if split else samples


def _managed(command: str, args, out_dir: str, cfg: dict, body) -> int:
    """Run body() between a RunManifest start and finish; failures are recorded then re-raised."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = RunManifest(command=command, config=cfg, inputs=_args_dict(args),
                           seed=getattr(args, "seed", 0) or 0)
    manifest.start(out_dir)
    try:
        outputs = body() or {}
    except Exception as e:
        manifest.finish(out_dir, status="failed", error=f"{type(e).__name__}: {e}")
        raise
    manifest.finish(out_dir, status="ok", **outputs)
    return 0


def build_config(args, train_samples=()) -> OPSConfig:
    """Map train/ops flags onto OPSConfig."""
    object_mask = getattr(args, "object_mask", "none")
    agnostic = getattr(args, "agnostic", "on") == "on"
    n_classes = 1
    if not agnostic:
        n_classes = max((p.class_id for s in train_samples for p in s.gt_parts if p.class_id is not None),
                        default=1)
    model = ModelConfig(channels_in=3 if object_mask == "none" else 4,
                        training_mode="class_agnostic" if agnostic else "class_aware",
                        num_part_classes=n_classes, num_queries=args.num_queries,
                        embed_dim=args.embed_dim, seed=args.seed)
    base_kw = {"seed": args.seed, "batch_size": args.batch_size}
    if args.iterations is not None:
        base_kw["iterations"] = args.iterations
        base_kw["milestones"] = tuple(m for m in (int(args.iterations * 0.67), int(args.iterations * 0.9)) if m > 0)
    ft_kw = {"seed": args.seed, "batch_size": args.batch_size,
             "enable_ss": getattr(args, "ss", "on") == "on",
             "enable_st": getattr(args, "st", "on") == "on",
             "rounds": getattr(args, "rounds", 1)}
    if getattr(args, "finetune_iterations", None) is not None:
        ft_kw["iterations"] = args.finetune_iterations
    return OPSConfig(
        model=model,
        base=TrainConfig.base(**base_kw),
        finetune=TrainConfig.finetune(**ft_kw),
        ss=SSConfig(K=getattr(args, "clusters", 10), seed=args.seed),
        object_mask=object_mask,
        mask_quality=MaskQuality(seed=args.seed),
        post_aware=getattr(args, "post_aware", "off") == "on",
        postaware_mask=getattr(args, "post_mask", "perfect"),
        protocol=getattr(args, "protocol", "transductive"),
        dump_clusters=getattr(args, "dump_clusters", False),
        seed=args.seed,
    )


def _eval_config(model, args) -> OPSConfig:
    """Inference-side config for a loaded checkpoint."""
    return OPSConfig(model=model.cfg, object_mask=args.object_mask,
                     mask_quality=MaskQuality(seed=args.mask_seed),
                     post_aware=args.post_aware == "on", postaware_mask=args.post_mask,
                     score_threshold=args.score_threshold)


# ---- Commands ----

def cmd_gen(args) -> int:
    manifest = default_manifest(seed=args.seed, n_train=args.n_train, n_val=args.n_unseen,
                                n_test=args.n_unseen, image_size=args.image_size)

    def body():
        samples = generate(manifest)
        return {"dataset": save_dataset(samples, args.out, manifest), "n_samples": len(samples)}

    return _managed("gen", args, args.out, manifest.to_dict(), body)


def cmd_train(args) -> int:
    samples = load_dataset(args.data, strict=args.strict)
    train = split_samples(samples, SPLIT_TRAIN)

    if args.stage == "base":
        cfg = build_config(args, train)

        def body():
            cfg.validate()
            write_json_atomic(cfg.to_dict(), os.path.join(args.out, RUN_CONFIG))
            model = train_base(train, cfg, log_path=os.path.join(args.out, RUN_LOG))
            digest = save_checkpoint(model, os.path.join(args.out, CKPT_BASE),
                                     meta={"stage": "base", "round": 0})
            return {"checkpoint": CKPT_BASE, "checkpoint_sha256": digest}

        return _managed("train", args, args.out, cfg.to_dict(), body)

    if not args.checkpoint:
        raise ConfigError("train --stage finetune needs --checkpoint")
    model = load_checkpoint(args.checkpoint)
    cfg = build_config(args, train)
    cfg.model = model.cfg
    if args.iterations is not None:
        cfg.finetune.iterations = args.iterations
    _, unlabeled, _ = select_splits(samples, cfg.protocol)

    def body():
        cfg.validate()
        write_json_atomic(cfg.to_dict(), os.path.join(args.out, RUN_CONFIG))
        audit = AccessAudit()
        pool = audited(unlabeled, audit)
        pseudo = None
        outputs = {}
        if cfg.finetune.enable_st:
            pseudo = generate_pseudo_labels(args.checkpoint, pool, cfg.finetune.pseudo_label_threshold,
                                            cfg, round_id=1, model=model)
            pseudo.save(os.path.join(args.out, pseudo_round_name(1)))
            outputs["pseudo_labels"] = pseudo_round_name(1)
        tuned = finetune(model, train, pool, pseudo, cfg, round_id=1,
                         log_path=os.path.join(args.out, RUN_LOG))
        digest = save_checkpoint(tuned, os.path.join(args.out, ckpt_round_name(1)),
                                 meta={"stage": "finetune", "round": 1})
        outputs.update(checkpoint=ckpt_round_name(1), checkpoint_sha256=digest, gt_reads=audit.total)
        return outputs

    return _managed("train", args, args.out, cfg.to_dict(), body)


def cmd_ops(args) -> int:
    samples = load_dataset(args.data, strict=args.strict)
    train = split_samples(samples, SPLIT_TRAIN)
    cfg = build_config(args, train)
    labeled, unlabeled, eval_set = select_splits(samples, cfg.protocol)

    def body():
        result = run_ops(labeled, unlabeled, cfg, args.out, eval_set=eval_set)
        return {"checkpoints": [name for name, _ in result.checkpoints],
                "pseudo_labels": result.pseudo_files,
                "metrics": RUN_METRICS if result.metrics else None,
                "gt_reads": result.gt_reads}

    return _managed("ops", args, args.out, cfg.to_dict(), body)


def cmd_infer(args) -> int:
    model = load_checkpoint(args.checkpoint)
    cfg = _eval_config(model, args)
    cfg.validate()
    samples = _load(args)
    preds = predict_split(model, samples, cfg)
    save_predictions(preds, {s.sample_id: s.size for s in samples}, args.out,
                     split=args.split, source=os.path.basename(args.checkpoint))
    return 0


def _baseline_config(args) -> BaselineConfig:
    cfg = BaselineConfig(method=args.method, params=parse_params(args.params), seed=args.seed)
    cfg.validate()
    return cfg


def cmd_baseline(args) -> int:
    samples = _load(args)
    quality = MaskQuality(seed=args.mask_seed)
    if args.grid:
        results = run_grid(samples, args.method, masks=(args.object_mask,), quality=quality, seed=args.seed)
        best = results[args.object_mask]["best"]
        logger.info(f"{args.method} best on {args.object_mask} masks: {best['params']} "
                    f"(AP {best['report'].ap * 100:.2f})")
        rows = [(f"{args.method} {r['params']}", r["report"]) for r in results[args.object_mask]["rows"]]
        print(build_report(f"{args.method.upper()} GRID ({args.object_mask} object mask)", rows))
        return 0
    cfg = _baseline_config(args)
    preds = predict_baseline(samples, cfg, args.object_mask, quality)
    save_predictions(preds, {s.sample_id: s.size for s in samples}, args.out,
                     split=args.split, source=cfg.method)
    return 0


def cmd_eval(args) -> int:
    samples = _load(args)
    if args.baseline:
        args.method = args.baseline
        preds = predict_baseline(samples, _baseline_config(args), args.object_mask,
                                 MaskQuality(seed=args.mask_seed))
        name = args.baseline
    else:
        preds = load_predictions(args.predictions)
        name = os.path.basename(args.predictions)
    ids = {s.sample_id for s in samples}
    extra = sorted(set(preds) - ids)
    if extra:
        logger.warning(f"{len(extra)} predicted image ids are not in the split and are ignored: {extra[:5]}")
    preds = {sid: preds.get(sid, []) for sid in sorted(ids)}
    gts = {s.sample_id: list(s.gt_parts) for s in samples}
    report = full_report(preds, gts, class_agnostic=not args.class_aware, semantic=True)
    print(build_report(f"EVALUATION ({args.split or 'all splits'})", [(name, report)]))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_metrics(report, os.path.join(args.out, RUN_METRICS),
                      extra={"source": name, "split": args.split, "class_agnostic": not args.class_aware})
    return 0


def cmd_viz(args) -> int:
    samples = _load(args)[: args.limit]
    preds = load_predictions(args.predictions) if args.predictions else None
    pseudo = PseudoLabelSet.load(args.pseudo) if args.pseudo else None
    model = cfg = None
    if args.dump_clusters:
        if not args.checkpoint:
            raise ConfigError("viz --dump-clusters needs --checkpoint")
        model = load_checkpoint(args.checkpoint)
        cfg = _eval_config(model, args)
        cfg.ss = SSConfig(seed=args.seed)

    for s in samples:
        clusters = None
        if model is not None:
            clusters = label_map(cluster_result(model, s, cfg), s.size)
        save_panels(s, args.out,
                    preds=preds.get(s.sample_id, []) if preds is not None else None,
                    cluster_labels=clusters,
                    pseudo=pseudo.get(s.sample_id) if pseudo is not None else None,
                    seed=args.seed)
    logger.info(f"Wrote {len(samples)} panels -> {args.out}")
    return 0


def cmd_experiments(args) -> int:
    seeds = [int(x) for x in args.seeds.split(",")]
    which = args.only.split(",") if args.only else None
    report_path, _ = run_experiments(seeds, args.out, which=which, quick=args.quick)
    with open(report_path, "r", encoding="utf-8") as f:
        print(f.read())
    return 0


COMMANDS = {
    "gen": cmd_gen, "train": cmd_train, "ops": cmd_ops, "infer": cmd_infer,
    "eval": cmd_eval, "baseline": cmd_baseline, "viz": cmd_viz, "experiments": cmd_experiments,
}
