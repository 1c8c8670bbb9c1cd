"""Desk-scale ablations: object awareness, class-agnostic vs class-aware, fine-tuning components,
OPS against the unsupervised baselines.

Each runner returns a list of flat result rows:
    {experiment, variant, seed, ap, ap50, miou, fwiou, macc}
"""
import os
import logging
import tempfile
from dataclasses import replace

from baselines.grid import run_grid, GRID_MASKS
from baselines.runner import METHODS
from config import SPLIT_TRAIN, SPLIT_TEST
from objectaware.imperfect import MaskQuality
from pipeline.audit import AccessAudit, audited
from pipeline.config import OPSConfig, TrainConfig
from pipeline.evaluate import evaluate_model
from pipeline.pseudo_labels import generate_pseudo_labels
from pipeline.train import train_base, finetune
from segmodel.checkpoint import save_checkpoint, load_checkpoint
from segmodel.model import ModelConfig
from selfsup.losses import SSConfig
from synthdata.generator import generate, split_samples
from synthdata.templates import default_manifest

logger = logging.getLogger("ops.experiments")

# ---- Budgets ----
FULL = {"n_train": 240, "n_unseen": 40, "base_iters": 1500, "finetune_iters": 300}
QUICK = {"n_train": 48, "n_unseen": 12, "base_iters": 120, "finetune_iters": 40}

OBJECT_VARIANTS = ("none", "imperfect", "perfect")
FINETUNE_VARIANTS = {"base": None, "ss": (True, False), "st": (False, True), "ss+st": (True, True)}


def _budget(quick: bool) -> dict:
    return QUICK if quick else FULL


def make_dataset(seed: int, quick: bool = False):
    b = _budget(quick)
    samples = generate(default_manifest(seed=seed, n_train=b["n_train"], n_val=0, n_test=b["n_unseen"]))
    return split_samples(samples, SPLIT_TRAIN), split_samples(samples, SPLIT_TEST)


def num_part_classes(samples) -> int:
    return max((p.class_id for s in samples for p in s.gt_parts if p.class_id is not None), default=1)


def desk_config(seed: int, object_mask: str = "none", agnostic: bool = True, n_classes: int = 1,
                ss: bool = True, st: bool = True, quick: bool = False) -> OPSConfig:
    b = _budget(quick)
    base_iters = b["base_iters"]
    model = ModelConfig(channels_in=3 if object_mask == "none" else 4,
                        training_mode="class_agnostic" if agnostic else "class_aware",
                        num_part_classes=1 if agnostic else n_classes, seed=seed)
    base = TrainConfig.base(iterations=base_iters, seed=seed,
                            milestones=(int(base_iters * 0.67), int(base_iters * 0.9)))
    ft = TrainConfig.finetune(iterations=b["finetune_iters"], seed=seed, enable_ss=ss, enable_st=st)
    return OPSConfig(model=model, base=base, finetune=ft, ss=SSConfig(seed=seed),
                     object_mask=object_mask, seed=seed)


def _row(experiment: str, variant: str, seed: int, report) -> dict:
    return {"experiment": experiment, "variant": variant, "seed": seed,
            "ap": report.ap, "ap50": report.ap50, "miou": report.miou,
            "fwiou": report.fwiou, "macc": report.macc}


def run_object_awareness(seeds, quick: bool = False) -> list[dict]:
    """Base models without / with imperfect / with perfect object masks, each also post-aware."""
    rows = []
    for seed in seeds:
        train, test = make_dataset(seed, quick)
        for mode in OBJECT_VARIANTS:
            cfg = desk_config(seed, object_mask=mode, quick=quick)
            model = train_base(train, cfg)
            _, report = evaluate_model(model, test, cfg)
            rows.append(_row("object_awareness", mode, seed, report))
            _, report = evaluate_model(model, test, replace(cfg, post_aware=True))
            rows.append(_row("object_awareness", f"{mode}+post", seed, report))
            logger.info(f"[object_awareness] seed {seed} {mode}: AP {rows[-2]['ap'] * 100:.2f} "
                        f"(post-aware {rows[-1]['ap'] * 100:.2f})")
    return rows


def run_agnostic_vs_aware(seeds, quick: bool = False) -> list[dict]:
    """Same data and budget, class-agnostic vs class-aware training; scored class-agnostically."""
    rows = []
    for seed in seeds:
        train, test = make_dataset(seed, quick)
        n_classes = num_part_classes(train)
        for agnostic in (True, False):
            cfg = desk_config(seed, agnostic=agnostic, n_classes=n_classes, quick=quick)
            model = train_base(train, cfg)
            _, report = evaluate_model(model, test, cfg)
            variant = "class_agnostic" if agnostic else "class_aware"
            rows.append(_row("agnostic_vs_aware", variant, seed, report))
            logger.info(f"[agnostic_vs_aware] seed {seed} {variant}: AP {report.ap * 100:.2f}")
    return rows


def run_finetune_components(seeds, quick: bool = False, workdir: str | None = None) -> list[dict]:
    """One base checkpoint per seed, fine-tuned with SS only, ST only and SS+ST (transductive)."""
    rows = []
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        for seed in seeds:
            train, test = make_dataset(seed, quick)
            cfg = desk_config(seed, quick=quick)
            model = train_base(train, cfg)
            ckpt = os.path.join(tmp, f"base_{seed}")
            save_checkpoint(model, ckpt, meta={"stage": "base", "seed": seed})

            for variant, flags in FINETUNE_VARIANTS.items():
                model = load_checkpoint(ckpt)
                if flags is not None:
                    ss, st = flags
                    vcfg = desk_config(seed, ss=ss, st=st, quick=quick)
                    audit = AccessAudit()
                    unlabeled = audited(test, audit)
                    pseudo = generate_pseudo_labels(ckpt, unlabeled, vcfg.finetune.pseudo_label_threshold,
                                                    vcfg, round_id=1, model=model) if st else None
                    model = finetune(model, train, unlabeled, pseudo, vcfg, round_id=1)
                    if audit.total:
                        logger.error(f"[finetune_components] {variant}: {audit.total} unlabeled gt reads")
                _, report = evaluate_model(model, test, cfg)
                rows.append(_row("finetune_components", variant, seed, report))
                logger.info(f"[finetune_components] seed {seed} {variant}: AP {report.ap * 100:.2f}")
    return rows


def _ops_model(train, test, cfg: OPSConfig, tmp: str, tag: str):
    """Base training, then one transductive SS+ST round on the test images."""
    model = train_base(train, cfg)
    ckpt = os.path.join(tmp, tag)
    save_checkpoint(model, ckpt, meta={"stage": "base", "seed": cfg.seed})
    audit = AccessAudit()
    unlabeled = audited(test, audit)
    pseudo = generate_pseudo_labels(ckpt, unlabeled, cfg.finetune.pseudo_label_threshold, cfg,
                                    round_id=1, model=model)
    model = finetune(model, train, unlabeled, pseudo, cfg, round_id=1)
    if audit.total:
        logger.error(f"[baselines_comparison] {tag}: {audit.total} unlabeled gt reads")
    return model


def run_baselines_comparison(seeds, quick: bool = False, workdir: str | None = None) -> list[dict]:
    """OPS vs SLIC / Felzenszwalb / ncut given the same perfect or imperfect object masks.

    Baselines use the best grid entry per method; OPS is pre-aware and post-aware with that mask.
    """
    rows = []
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        for seed in seeds:
            train, test = make_dataset(seed, quick)
            quality = MaskQuality(seed=seed)
            for mode in GRID_MASKS:
                cfg = replace(desk_config(seed, object_mask=mode, quick=quick), mask_quality=quality,
                              post_aware=True)
                model = _ops_model(train, test, cfg, tmp, f"{mode}_{seed}")
                _, report = evaluate_model(model, test, cfg)
                rows.append(_row("baselines_comparison", f"ops/{mode}", seed, report))
                for method in METHODS:
                    best = run_grid(test, method, masks=(mode,), quality=quality, seed=seed)[mode]["best"]
                    rows.append(_row("baselines_comparison", f"{method}/{mode}", seed, best["report"]))
                scores = ", ".join(f"{r['variant']} {r['miou'] * 100:.2f}" for r in rows[-1 - len(METHODS):])
                logger.info(f"[baselines_comparison] seed {seed} mIoU: {scores}")
    return rows
