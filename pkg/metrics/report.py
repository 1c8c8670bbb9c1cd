"""Text tables and metrics.json output."""
import logging

import pandas as pd

from metrics.ap import MetricsReport, evaluate_ap
from metrics.semantic import oracle_assign_all, evaluate_semantic
from utils.helpers import fmt_pct, write_json_atomic

logger = logging.getLogger("ops.metrics")

COLUMNS = ["AP", "AP50", "mIoU", "fwIoU", "mACC"]


def full_report(preds, gts, class_agnostic: bool = True, semantic: bool = True) -> MetricsReport:
    """AP/AP50 plus the oracle-assignment semantic metrics."""
    report = evaluate_ap(preds, gts, class_agnostic=class_agnostic)
    if semantic:
        assigned = oracle_assign_all(preds, gts)
        report.miou, report.fwiou, report.macc = evaluate_semantic(assigned, gts)
    return report


def report_row(name: str, r: MetricsReport) -> dict:
    return {
        "method": name,
        "AP": fmt_pct(r.ap), "AP50": fmt_pct(r.ap50),
        "mIoU": fmt_pct(r.miou), "fwIoU": fmt_pct(r.fwiou), "mACC": fmt_pct(r.macc),
    }


def format_table(rows) -> str:
    """rows: iterable of (name, MetricsReport). Values x100, 2 decimals."""
    df = pd.DataFrame([report_row(n, r) for n, r in rows], columns=["method", *COLUMNS])
    if df.empty:
        return "(no results)"
    return df.to_string(index=False)


def build_report(title: str, rows) -> str:
    lines = []
    lines.append("=" * 70)
    lines.append(f"  {title}")
    lines.append("=" * 70)
    lines.append(format_table(rows))
    for name, r in rows:
        lines.append("")
        lines.append(f"{name}: {r.n_images} images, {r.n_gt} gt parts, {r.n_pred} predictions")
        per_t = "  ".join(fmt_pct(x, 1) for x in r.per_threshold_ap)
        lines.append(f"  AP per IoU threshold (0.50..0.95): {per_t}")
    lines.append("=" * 70)
    return "\n".join(lines)


def write_metrics(report: MetricsReport, path: str, extra: dict | None = None):
    doc = report.to_dict()
    if extra:
        doc.update(extra)
    write_json_atomic(doc, path)
    logger.info(f"Metrics -> {path}: AP {fmt_pct(report.ap)} / AP50 {fmt_pct(report.ap50)}")
