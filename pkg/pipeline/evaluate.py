"""Model evaluation over a split, and training-log summaries."""
import os
import logging

import pandas as pd

from config import RUN_LOG
from metrics.report import full_report
from objectaware.compose import postaware_filter
from objectaware.imperfect import resolve_object_mask
from pipeline.data import seen_object_mask, model_image
from segmodel.inference import infer

logger = logging.getLogger("ops.pipeline")

LOSS_COLUMNS = ["loss_total", "loss_sup", "loss_c", "loss_a"]


def predict_split(model, samples, cfg) -> dict:
    """{sample_id: [PartInstance]} with the configured object mask and post-aware filter.

    Pre-aware models are filtered with the mask they saw; 3-channel models with
    cfg.postaware_mask.
    """
    preds = {}
    for s in samples:
        seen = seen_object_mask(s, cfg, labeled=False)
        parts = infer(model, model_image(s, seen), cfg.score_threshold)
        if cfg.post_aware:
            mask = seen if seen is not None else resolve_object_mask(s, cfg.postaware_mask, cfg.mask_quality)
            parts = postaware_filter(parts, mask)
        preds[s.sample_id] = parts
    return preds


def evaluate_model(model, samples, cfg, semantic: bool = True):
    """Predict on samples and score against their gt parts. Returns (preds, MetricsReport)."""
    preds = predict_split(model, samples, cfg)
    gts = {s.sample_id: list(s.gt_parts) for s in samples}
    report = full_report(preds, gts, class_agnostic=True, semantic=semantic)
    logger.info(f"Evaluated {len(samples)} images: AP {report.ap * 100:.2f} AP50 {report.ap50 * 100:.2f}")
    return preds, report


def load_log(run_dir: str) -> pd.DataFrame:
    path = os.path.join(run_dir, RUN_LOG) if os.path.isdir(run_dir) else run_dir
    if not os.path.exists(path) or os.path.getsize(path) == 0:
        return pd.DataFrame(columns=["step", "stage", "round", "lr", *LOSS_COLUMNS])
    return pd.read_json(path, lines=True)


def summarize_log(run_dir: str) -> pd.DataFrame:
    """First / last / min of every loss term per (stage, round)."""
    df = load_log(run_dir)
    if df.empty:
        return df
    rows = []
    # groups keep log order: base, then round 1, 2, ...
    for (stage, rnd), g in df.groupby(["stage", "round"], sort=False):
        g = g.sort_values("step", kind="mergesort")
        row = {"stage": stage, "round": int(rnd), "steps": len(g)}
        for col in LOSS_COLUMNS:
            row[f"{col}_first"] = float(g[col].iloc[0])
            row[f"{col}_last"] = float(g[col].iloc[-1])
            row[f"{col}_min"] = float(g[col].min())
        rows.append(row)
    return pd.DataFrame(rows)
