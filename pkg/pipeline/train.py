"""Stage 1 base training and stage 2 fine-tuning (self-training + self-supervision)."""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
import torch

import config
from config import SPLIT_TRAIN
from core.errors import ConfigError, KMeansError
from pipeline.data import build_examples, seen_object_mask, stack
from segmodel.criterion import match_and_loss
from segmodel.model import PartSegmenter, QueryOutput
from selfsup.kmeans import kmeans
from selfsup.losses import prepare_features, terms_from_clusters
from utils.helpers import derive_seed

logger = logging.getLogger("ops.pipeline")


def _deterministic():
    torch.use_deterministic_algorithms(True)


def build_optimizer(model: PartSegmenter, tcfg):
    opt = torch.optim.AdamW(model.parameters(), lr=tcfg.learning_rate, weight_decay=tcfg.weight_decay)
    sched = torch.optim.lr_scheduler.MultiStepLR(opt, milestones=list(tcfg.milestones), gamma=tcfg.gamma)
    return opt, sched


def check_query_budget(samples, model_cfg):
    for s in samples:
        n = len(s.gt_parts)
        if n > model_cfg.num_queries:
            raise ConfigError(f"sample {s.sample_id} has {n} parts but the model has "
                              f"{model_cfg.num_queries} queries; raise num_queries to >= {n}")


# ---- Per-step losses ----

def supervised_loss(mask_logits, class_logits, targets: list, model_cfg) -> torch.Tensor:
    """Mean set-prediction loss over the supervised slots of a batch."""
    losses = [match_and_loss(QueryOutput(mask_logits[i], class_logits[i]), parts, model_cfg)[0]
              for i, parts in enumerate(targets)]
    return torch.stack(losses).mean()


def self_supervised_loss(feats, regions: list, ss_cfg, seed: int, step: int,
                         workers: int | None = None) -> dict:
    """Mean L_SS over feature maps; clustering of the detached features may fan out.

    Slots whose object region vanished after augmentation are skipped.
    """
    prepared = [prepare_features(feats[i], ss_cfg) for i in range(len(regions))]

    def _cluster(i):
        fm, excluded = prepared[i]
        try:
            return kmeans(fm.detach(), regions[i], replace(ss_cfg, seed=derive_seed(ss_cfg.seed, seed, step, i)),
                          excluded=excluded)
        except KMeansError as e:
            logger.warning(f"step {step} slot {i}: {e}; slot skipped")
            return None

    workers = workers or config.NUM_WORKERS
    if workers > 1 and len(regions) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            clusters = list(pool.map(_cluster, range(len(regions))))
    else:
        clusters = [_cluster(i) for i in range(len(regions))]

    terms = [terms_from_clusters(prepared[i][0], cr, ss_cfg) for i, cr in enumerate(clusters) if cr is not None]
    if not terms:
        zero = feats.sum() * 0.0
        return {"total": zero, "loss_c": zero, "loss_a": zero}
    return {k: torch.stack([t[k] for t in terms]).mean() for k in ("total", "loss_c", "loss_a")}


def step_losses(model, sup_examples, ss_examples, model_cfg, ss_cfg, seed: int, step: int) -> dict:
    """Forward one batch (supervised slots first) and combine the enabled loss terms."""
    examples = list(sup_examples) + list(ss_examples)
    feats, mask_logits, class_logits = model(stack(examples))
    zero = feats.sum() * 0.0
    out = {"loss_sup": zero, "loss_c": zero, "loss_a": zero, "loss_ss": zero}
    n_sup = len(sup_examples)
    if n_sup:
        out["loss_sup"] = supervised_loss(mask_logits[:n_sup], class_logits[:n_sup],
                                          [e.parts for e in sup_examples], model_cfg)
    if ss_examples:
        ss = self_supervised_loss(feats[n_sup:], [e.region for e in ss_examples], ss_cfg, seed, step)
        out.update(loss_ss=ss["total"], loss_c=ss["loss_c"], loss_a=ss["loss_a"])
    out["loss_total"] = out["loss_sup"] + out["loss_ss"]
    return out


class StepLogger:
    """Appends one JSON object per step to log.jsonl."""

    def __init__(self, path: str | None, stage: str, round_id: int = 0):
        self.path = path
        self.stage = stage
        self.round_id = round_id

    def write(self, step: int, losses: dict, lr: float):
        if not self.path:
            return
        rec = {"step": step, "stage": self.stage, "round": self.round_id, "lr": lr}
        for k in ("loss_total", "loss_sup", "loss_c", "loss_a"):
            rec[k] = float(losses[k].detach())
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def _optimize(model, opt, sched, losses: dict):
    opt.zero_grad(set_to_none=True)
    losses["loss_total"].backward()
    opt.step()
    sched.step()


# ---- Stage 1 ----

def train_base(train_set, cfg, log_path: str | None = None) -> PartSegmenter:
    """Supervised training on labeled train_seen samples."""
    cfg.validate()
    tcfg = cfg.base
    bad = [s.sample_id for s in train_set if s.split_tag != SPLIT_TRAIN]
    if bad:
        raise ConfigError(f"train_base expects train_seen samples only; got other splits for ids {bad[:5]}")
    if not train_set:
        raise ConfigError("train_base: empty training set")
    check_query_budget(train_set, cfg.model)
    _deterministic()

    model = PartSegmenter(cfg.model)
    model.train()
    opt, sched = build_optimizer(model, tcfg)
    log = StepLogger(log_path, "base")
    logger.info(f"Base training: {len(train_set)} samples, {tcfg.iterations} steps, "
                f"batch {tcfg.batch_size}, mode {cfg.model.training_mode}, "
                f"channels {cfg.model.channels_in}")

    for step in range(tcfg.iterations):
        rng = np.random.default_rng(derive_seed(tcfg.seed, step))
        picks = rng.integers(0, len(train_set), size=tcfg.batch_size)
        jobs = []
        for i in picks:
            s = train_set[int(i)]
            jobs.append((s, list(s.gt_parts), seen_object_mask(s, cfg, labeled=True)))
        sup = build_examples(jobs, tcfg.seed, step, tcfg)
        losses = step_losses(model, sup, [], cfg.model, cfg.ss, tcfg.seed, step)
        lr = opt.param_groups[0]["lr"]
        _optimize(model, opt, sched, losses)
        log.write(step, losses, lr)
        if (step + 1) % tcfg.log_every == 0 or step == tcfg.iterations - 1:
            logger.info(f"[base] step {step + 1}/{tcfg.iterations} "
                        f"loss {float(losses['loss_total']):.4f} lr {lr:.2e}")
    model.eval()
    return model


# ---- Stage 2 ----

def supervised_pool(labeled_set, unlabeled_set, pseudo, tcfg) -> list:
    """(sample, source) pairs for the supervised slots: labeled gt + pseudo-labeled images."""
    pool = [(s, "gt") for s in labeled_set]
    if tcfg.enable_st:
        if pseudo is None or pseudo.n_instances == 0:
            logger.warning("Self-training enabled but the pseudo-label set is empty; "
                           "only labeled images feed the supervised term")
        else:
            by_id = {s.sample_id: s for s in unlabeled_set}
            pool += [(by_id[i], "pseudo") for i in pseudo.non_empty_ids() if i in by_id]
    return pool


def finetune(model: PartSegmenter, labeled_set, unlabeled_set, pseudo, cfg,
             round_id: int = 1, log_path: str | None = None) -> PartSegmenter:
    """Fine-tune with mix_ratio supervised slots and (1 - mix_ratio) self-supervised slots."""
    tcfg = cfg.finetune
    tcfg.validate()
    if tcfg.stage != "finetune":
        raise ConfigError("finetune requires a TrainConfig with stage='finetune'")
    _deterministic()

    sup_pool = supervised_pool(labeled_set, unlabeled_set, pseudo, tcfg)
    ss_pool = list(unlabeled_set) if tcfg.enable_ss else []
    n_sup = tcfg.n_supervised
    n_ss = tcfg.batch_size - n_sup
    if n_ss and not ss_pool:
        logger.warning("Self-supervision enabled but no unlabeled images; SS slots become supervised")
        n_sup, n_ss = tcfg.batch_size, 0
    if n_sup and not sup_pool:
        raise ConfigError("finetune: supervised slots requested but the supervised pool is empty")

    model.train()
    opt, sched = build_optimizer(model, tcfg)
    log = StepLogger(log_path, "finetune", round_id)
    seed = derive_seed(tcfg.seed, round_id)
    logger.info(f"Fine-tune round {round_id}: {tcfg.iterations} steps, {n_sup} supervised + "
                f"{n_ss} self-supervised slots, pools {len(sup_pool)}/{len(ss_pool)}, "
                f"SS={'on' if tcfg.enable_ss else 'off'} ST={'on' if tcfg.enable_st else 'off'}")

    for step in range(tcfg.iterations):
        rng = np.random.default_rng(derive_seed(seed, step))
        sup_jobs = []
        for i in (rng.integers(0, len(sup_pool), size=n_sup) if n_sup else []):
            s, source = sup_pool[int(i)]
            if source == "gt":
                jobs_parts = list(s.gt_parts)
                seen = seen_object_mask(s, cfg, labeled=True)
            else:
                jobs_parts = pseudo.get(s.sample_id)
                seen = seen_object_mask(s, cfg, labeled=False)
            sup_jobs.append((s, jobs_parts, seen))
        ss_jobs = [(ss_pool[int(i)], [], seen_object_mask(ss_pool[int(i)], cfg, labeled=False))
                   for i in (rng.integers(0, len(ss_pool), size=n_ss) if n_ss else [])]

        examples = build_examples(sup_jobs + ss_jobs, seed, step, tcfg)
        losses = step_losses(model, examples[:n_sup], examples[n_sup:], cfg.model, cfg.ss, seed, step)
        lr = opt.param_groups[0]["lr"]
        _optimize(model, opt, sched, losses)
        log.write(step, losses, lr)
        if (step + 1) % tcfg.log_every == 0 or step == tcfg.iterations - 1:
            logger.info(f"[finetune r{round_id}] step {step + 1}/{tcfg.iterations} "
                        f"loss {float(losses['loss_total']):.4f} (sup {float(losses['loss_sup']):.4f}, "
                        f"L_c {float(losses['loss_c']):.4f}, L_a {float(losses['loss_a']):.4f})")
    model.eval()
    return model
