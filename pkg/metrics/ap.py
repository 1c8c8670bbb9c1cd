"""Mask AP / AP50 over IoU thresholds 0.50:0.05:0.95 with 101-point interpolation."""
import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from core.errors import MetricsError
from core.masks import iou_matrix

logger = logging.getLogger("ops.metrics")

IOU_THRESHOLDS = np.round(np.linspace(0.50, 0.95, 10), 2)
RECALL_POINTS = np.linspace(0.0, 1.0, 101)


@dataclass
class MetricsReport:
    ap: float = 0.0
    ap50: float = 0.0
    per_threshold_ap: list = field(default_factory=lambda: [0.0] * len(IOU_THRESHOLDS))
    miou: float | None = None
    fwiou: float | None = None
    macc: float | None = None
    n_images: int = 0
    n_gt: int = 0
    n_pred: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["iou_thresholds"] = [float(t) for t in IOU_THRESHOLDS]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def index_by_image(items, name: str) -> dict:
    """dict {id: parts} | list of (id, parts) pairs | list of per-image lists -> dict.

    Duplicate ids raise MetricsError.
    """
    if isinstance(items, dict):
        return dict(items)
    items = list(items)
    if items and all(isinstance(x, tuple) and len(x) == 2 and not hasattr(x[1], "mask") for x in items):
        out = {}
        for image_id, parts in items:
            if image_id in out:
                raise MetricsError(f"{name}: duplicate image id {image_id}")
            out[image_id] = list(parts)
        return out
    return {i: list(parts) for i, parts in enumerate(items)}


def align(preds, gts) -> tuple[list, list, list]:
    """Aligned (ids, pred lists, gt lists); ids must match exactly."""
    p, g = index_by_image(preds, "predictions"), index_by_image(gts, "ground truth")
    if set(p) != set(g):
        missing = sorted(set(g) - set(p), key=str)[:5]
        extra = sorted(set(p) - set(g), key=str)[:5]
        raise MetricsError(f"image ids do not align (missing predictions for {missing}, "
                           f"unknown images {extra})")
    ids = sorted(g)
    return ids, [p[i] for i in ids], [g[i] for i in ids]


# ---- Matching ----

def match_image(preds: list, gts: list, thresholds=IOU_THRESHOLDS) -> tuple[np.ndarray, np.ndarray]:
    """Greedy matching in descending score order.

    Returns (scores in matched order, tp bool matrix (T, P)).
    """
    order = sorted(range(len(preds)), key=lambda i: -preds[i].score)
    scores = np.array([preds[i].score for i in order], dtype=np.float64)
    tp = np.zeros((len(thresholds), len(preds)), dtype=bool)
    if not preds or not gts:
        return scores, tp
    ious = iou_matrix([preds[i].mask for i in order], [g.mask for g in gts])
    for t, thr in enumerate(thresholds):
        taken = np.zeros(len(gts), dtype=bool)
        for j in range(len(order)):
            cand = np.where(taken, -1.0, ious[j])
            best = int(np.argmax(cand))
            if cand[best] >= thr:
                taken[best] = True
                tp[t, j] = True
    return scores, tp


def interpolated_ap(tp: np.ndarray, n_gt: int) -> float:
    """101-point interpolated AP from a tp vector already in descending score order."""
    if n_gt == 0 or tp.size == 0:
        return 0.0
    tps = np.cumsum(tp, dtype=np.float64)
    fps = np.cumsum(~tp, dtype=np.float64)
    recall = tps / n_gt
    precision = tps / np.maximum(tps + fps, np.finfo(np.float64).eps)
    # precision envelope
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    q = np.where(idx < len(precision), precision[np.minimum(idx, len(precision) - 1)], 0.0)
    return float(q.mean())


def _ap_single_class(pred_lists, gt_lists) -> np.ndarray:
    all_scores, all_tp, n_gt = [], [], 0
    for preds, gts in zip(pred_lists, gt_lists):
        scores, tp = match_image(preds, gts)
        all_scores.append(scores)
        all_tp.append(tp)
        n_gt += len(gts)
    if not all_scores:
        return np.zeros(len(IOU_THRESHOLDS))
    scores = np.concatenate(all_scores)
    tp = np.concatenate(all_tp, axis=1)
    order = np.argsort(-scores, kind="mergesort")
    tp = tp[:, order]
    return np.array([interpolated_ap(tp[t], n_gt) for t in range(len(IOU_THRESHOLDS))])


def evaluate_ap(preds, gts, class_agnostic: bool = True) -> MetricsReport:
    """Instance AP over all images.

    class_agnostic=True treats every part as one class. Otherwise AP is
    averaged over the part classes present in ground truth, matching only
    predictions of the same class.
    """
    ids, pred_lists, gt_lists = align(preds, gts)
    if class_agnostic:
        per_t = _ap_single_class(pred_lists, gt_lists)
    else:
        classes = sorted({g.class_id for gl in gt_lists for g in gl if g.class_id is not None})
        if not classes:
            per_t = np.zeros(len(IOU_THRESHOLDS))
        else:
            per_class = []
            for c in classes:
                pc = [[p for p in pl if p.class_id == c] for pl in pred_lists]
                gc = [[g for g in gl if g.class_id == c] for gl in gt_lists]
                per_class.append(_ap_single_class(pc, gc))
            per_t = np.mean(per_class, axis=0)

    return MetricsReport(
        ap=float(per_t.mean()),
        ap50=float(per_t[0]),
        per_threshold_ap=[float(x) for x in per_t],
        n_images=len(ids),
        n_gt=sum(len(g) for g in gt_lists),
        n_pred=sum(len(p) for p in pred_lists),
    )


def to_agnostic(parts_by_image: dict) -> dict:
    return {k: [p.agnostic() for p in v] for k, v in parts_by_image.items()}


