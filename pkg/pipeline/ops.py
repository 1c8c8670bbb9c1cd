"""OPS run: base training, then rounds of pseudo labeling + fine-tuning.

Run directory:
    config.json, log.jsonl, ckpt_base, pseudo_round_k.json, ckpt_round_k, metrics.json
"""
import os
import logging
from dataclasses import dataclass, field

import torch

from config import (RUN_CONFIG, RUN_LOG, RUN_METRICS, CKPT_BASE, SPLIT_TRAIN, SPLIT_VAL,
                    SPLIT_TEST, ckpt_round_name, pseudo_round_name)
from core.errors import ConfigError
from metrics.report import write_metrics
from pipeline.audit import AccessAudit, audited
from pipeline.data import seen_object_mask, region_mask, model_image
from pipeline.evaluate import evaluate_model
from pipeline.pseudo_labels import generate_pseudo_labels
from pipeline.train import train_base, finetune
from segmodel.checkpoint import save_checkpoint, load_checkpoint
from segmodel.model import forward
from selfsup.diagnostics import dump_clusters
from selfsup.losses import loss_ss_terms
from utils.helpers import write_json_atomic

logger = logging.getLogger("ops.pipeline")


@dataclass
class RunResult:
    run_dir: str
    checkpoints: list = field(default_factory=list)     # [(name, sha256)]
    pseudo_files: list = field(default_factory=list)
    gt_reads: int = 0
    pseudo_reads: list = field(default_factory=list)
    metrics: dict | None = None

    @property
    def final_checkpoint(self) -> str:
        return os.path.join(self.run_dir, self.checkpoints[-1][0])


def select_splits(samples, protocol: str) -> tuple[list, list, list]:
    """(labeled, unlabeled, evaluation) sets for a protocol.

    transductive: fine-tune on test_unseen images and evaluate on them.
    cross_split: fine-tune on val_unseen, evaluate on held-out test_unseen.
    """
    labeled = [s for s in samples if s.split_tag == SPLIT_TRAIN]
    test = [s for s in samples if s.split_tag == SPLIT_TEST]
    if protocol == "transductive":
        return labeled, test, test
    if protocol == "cross_split":
        return labeled, [s for s in samples if s.split_tag == SPLIT_VAL], test
    raise ConfigError(f"unknown protocol {protocol!r}")


def cluster_result(model, sample, cfg):
    """k-means clustering of one image's features, restricted to the region the model saw."""
    seen = seen_object_mask(sample, cfg, labeled=False)
    with torch.no_grad():
        fm, _ = forward(model, model_image(sample, seen))
        _, cr = loss_ss_terms(fm, region_mask(sample, seen), cfg.ss)
    return cr


def _dump_cluster_maps(model, unlabeled, cfg, out_dir: str, limit: int = 8):
    for s in unlabeled[:limit]:
        dump_clusters(cluster_result(model, s, cfg), out_dir, f"{s.sample_id:06d}", image_size=s.size)


def run_ops(train_set, unlabeled_set, cfg, run_dir: str, eval_set=None) -> RunResult:
    """train_base -> rounds x {generate_pseudo_labels -> finetune}; artifacts persisted per stage."""
    cfg.validate()
    os.makedirs(run_dir, exist_ok=True)
    write_json_atomic(cfg.to_dict(), os.path.join(run_dir, RUN_CONFIG))
    log_path = os.path.join(run_dir, RUN_LOG)
    if os.path.exists(log_path):
        os.remove(log_path)

    audit = AccessAudit()
    unlabeled = audited(unlabeled_set, audit)
    result = RunResult(run_dir=run_dir)

    model = train_base(train_set, cfg, log_path=log_path)
    ckpt = os.path.join(run_dir, CKPT_BASE)
    digest = save_checkpoint(model, ckpt, meta={"stage": "base", "round": 0})
    result.checkpoints.append((CKPT_BASE, digest))

    for k in range(1, cfg.rounds + 1):
        model = load_checkpoint(ckpt)
        pseudo = generate_pseudo_labels(ckpt, unlabeled, cfg.finetune.pseudo_label_threshold,
                                        cfg, round_id=k, model=model)
        pseudo.validate(checkpoint_hash=digest)
        pseudo_path = os.path.join(run_dir, pseudo_round_name(k))
        pseudo.save(pseudo_path)
        result.pseudo_files.append(pseudo_round_name(k))

        model = finetune(model, train_set, unlabeled, pseudo, cfg, round_id=k, log_path=log_path)
        result.pseudo_reads.append(pseudo.reads)
        ckpt = os.path.join(run_dir, ckpt_round_name(k))
        digest = save_checkpoint(model, ckpt, meta={"stage": "finetune", "round": k,
                                                    "pseudo_labels": pseudo_round_name(k)})
        result.checkpoints.append((ckpt_round_name(k), digest))
        logger.info(f"Round {k}/{cfg.rounds} done -> {ckpt_round_name(k)}")

    result.gt_reads = audit.total
    if result.gt_reads:
        logger.error(f"Unlabeled gt_parts were read {result.gt_reads} times during training")

    if cfg.dump_clusters and unlabeled_set:
        _dump_cluster_maps(load_checkpoint(ckpt), list(unlabeled_set), cfg,
                           os.path.join(run_dir, "clusters"))

    if eval_set is not None:
        final = load_checkpoint(ckpt)
        _, report = evaluate_model(final, eval_set, cfg)
        result.metrics = report.to_dict()
        write_metrics(report, os.path.join(run_dir, RUN_METRICS),
                      extra={"checkpoint": result.checkpoints[-1][0],
                             "checkpoint_sha256": result.checkpoints[-1][1],
                             "protocol": cfg.protocol})
    return result
