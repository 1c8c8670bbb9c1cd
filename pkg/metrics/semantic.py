"""Oracle class assignment and semantic-segmentation metrics (mIoU, fwIoU, mACC)."""
import logging

import numpy as np

from config import BACKGROUND_CLASS_ID
from core.masks import iou_matrix
from metrics.ap import align

logger = logging.getLogger("ops.metrics")


def oracle_assign(preds: list, gts: list) -> list:
    """Relabel each prediction with the class of its highest-IoU gt part.

    Zero overlap with every gt -> background. Equal IoU -> lowest class id.
    """
    if not preds:
        return []
    if not gts:
        return [p.with_class(BACKGROUND_CLASS_ID) for p in preds]
    ious = iou_matrix([p.mask for p in preds], [g.mask for g in gts])
    classes = np.array([g.class_id for g in gts])
    out = []
    for i, p in enumerate(preds):
        best = ious[i].max()
        if best <= 0:
            out.append(p.with_class(BACKGROUND_CLASS_ID))
            continue
        cls = int(classes[ious[i] == best].min())
        out.append(p.with_class(cls))
    return out


def oracle_assign_all(preds, gts) -> dict:
    ids, pl, gl = align(preds, gts)
    return {i: oracle_assign(p, g) for i, p, g in zip(ids, pl, gl)}


def rasterize(parts: list, shape: tuple[int, int]) -> np.ndarray:
    """Label map; higher score wins on overlap, earlier instance wins on equal score."""
    out = np.full(shape, BACKGROUND_CLASS_ID, dtype=np.int64)
    order = sorted(range(len(parts)), key=lambda i: -parts[i].score)
    for i in reversed(order):
        p = parts[i]
        if p.class_id is None or p.class_id == BACKGROUND_CLASS_ID:
            continue
        out[p.mask] = p.class_id
    return out


def confusion(pred_lists, gt_lists) -> tuple[np.ndarray, list]:
    """Pixel confusion matrix (gt rows, pred columns) over background + part classes."""
    classes = sorted({g.class_id for gl in gt_lists for g in gl if g.class_id is not None})
    pred_classes = {p.class_id for pl in pred_lists for p in pl if p.class_id}
    n = max([BACKGROUND_CLASS_ID, *classes, *pred_classes]) + 1
    cm = np.zeros((n, n), dtype=np.int64)
    for preds, gts in zip(pred_lists, gt_lists):
        if not gts and not preds:
            continue
        shape = (gts[0] if gts else preds[0]).mask.shape
        g = rasterize(gts, shape)
        p = rasterize(preds, shape)
        cm += np.bincount(g.ravel() * n + p.ravel(), minlength=n * n).reshape(n, n)
    return cm, classes


def evaluate_semantic(preds_after_oracle, gts) -> tuple[float, float, float]:
    """(mIoU, fwIoU, mACC) over the part classes present in ground truth."""
    _, pl, gl = align(preds_after_oracle, gts)
    cm, classes = confusion(pl, gl)
    if not classes:
        return 0.0, 0.0, 0.0
    ious, accs, freqs = [], [], []
    for c in classes:
        tp = cm[c, c]
        gt_c = cm[c, :].sum()
        pred_c = cm[:, c].sum()
        union = gt_c + pred_c - tp
        ious.append(tp / union if union else 0.0)
        accs.append(tp / gt_c if gt_c else 0.0)
        freqs.append(gt_c)
    ious, accs, freqs = np.array(ious), np.array(accs), np.array(freqs, dtype=np.float64)
    fw = float((freqs * ious).sum() / freqs.sum()) if freqs.sum() else 0.0
    return float(ious.mean()), fw, float(accs.mean())
