"""Aggregate ablation rows and check the directional claims."""
import os
import logging

import pandas as pd

from utils.helpers import fmt_pct, write_json_atomic

logger = logging.getLogger("ops.experiments")

REPORT_FILE = "experiments_report.txt"
RESULTS_FILE = "experiments_results.json"

# Minimum AP gaps (fractions, not points)
OBJECT_GAP = 0.01
POSTAWARE_SLACK = 0.002
AGNOSTIC_SLACK = 0.003
FINETUNE_SLACK = 0.002


def summarize(rows) -> pd.DataFrame:
    """Mean / std / n of every metric per (experiment, variant)."""
    df = pd.DataFrame(rows)
    if df.empty:
        return df
    metrics = ["ap", "ap50", "miou", "fwiou", "macc"]
    g = df.groupby(["experiment", "variant"], sort=False)[metrics]
    out = g.mean().add_suffix("_mean").join(g.std(ddof=0).add_suffix("_std"))
    out["n_seeds"] = g.size()
    return out.reset_index()


def _mean(summary: pd.DataFrame, experiment: str, variant: str, metric: str = "ap") -> float | None:
    sel = summary[(summary["experiment"] == experiment) & (summary["variant"] == variant)]
    return None if sel.empty else float(sel[f"{metric}_mean"].iloc[0])


def check_claims(summary: pd.DataFrame) -> list[dict]:
    """[{claim, passed, detail}] for every experiment present in the summary."""
    checks = []
    if summary.empty:
        return checks
    present = set(summary["experiment"])

    if "object_awareness" in present:
        none, imp, perf = (_mean(summary, "object_awareness", v) for v in ("none", "imperfect", "perfect"))
        checks.append({
            "claim": "pre-aware perfect > imperfect > none (gaps > 1 AP point)",
            "passed": perf - imp > OBJECT_GAP and imp - none > OBJECT_GAP,
            "detail": f"perfect {fmt_pct(perf)} / imperfect {fmt_pct(imp)} / none {fmt_pct(none)}",
        })
        drops = []
        for v in ("none", "imperfect", "perfect"):
            post = _mean(summary, "object_awareness", f"{v}+post")
            drops.append(_mean(summary, "object_awareness", v) - post)
        checks.append({
            "claim": "post-aware filtering never costs more than 0.2 AP",
            "passed": max(drops) <= POSTAWARE_SLACK,
            "detail": "max drop " + fmt_pct(max(drops)),
        })

    if "agnostic_vs_aware" in present:
        agn = _mean(summary, "agnostic_vs_aware", "class_agnostic")
        awr = _mean(summary, "agnostic_vs_aware", "class_aware")
        checks.append({
            "claim": "class-agnostic AP >= class-aware AP - 0.3",
            "passed": agn >= awr - AGNOSTIC_SLACK,
            "detail": f"agnostic {fmt_pct(agn)} / aware {fmt_pct(awr)}",
        })

    if "finetune_components" in present:
        base, ss, st, both = (_mean(summary, "finetune_components", v) for v in ("base", "ss", "st", "ss+st"))
        checks.append({
            "claim": "SS+ST fine-tuning beats the base checkpoint",
            "passed": both > base,
            "detail": f"ss+st {fmt_pct(both)} / base {fmt_pct(base)}",
        })
        checks.append({
            "claim": "SS-only and ST-only stay within 0.2 AP of the base checkpoint",
            "passed": ss >= base - FINETUNE_SLACK and st >= base - FINETUNE_SLACK,
            "detail": f"ss {fmt_pct(ss)} / st {fmt_pct(st)} / base {fmt_pct(base)}",
        })

    if "baselines_comparison" in present:
        variants = set(summary.loc[summary["experiment"] == "baselines_comparison", "variant"])
        for mode in sorted({v.split("/", 1)[1] for v in variants}):
            ops = _mean(summary, "baselines_comparison", f"ops/{mode}", "miou")
            others = {v.split("/", 1)[0]: _mean(summary, "baselines_comparison", v, "miou")
                      for v in sorted(variants) if v.endswith(f"/{mode}") and not v.startswith("ops/")}
            if ops is None or not others:
                continue
            checks.append({
                "claim": f"OPS mIoU beats every baseline with {mode} object masks",
                "passed": all(ops > m for m in others.values()),
                "detail": f"ops {fmt_pct(ops)} / " + " / ".join(f"{k} {fmt_pct(m)}" for k, m in others.items()),
            })
    return checks


def build_experiments_report(summary: pd.DataFrame, checks: list[dict], seeds) -> str:
    lines = []
    lines.append("=" * 70)
    lines.append(f"  ABLATIONS ({len(list(seeds))} seeds: {', '.join(str(s) for s in seeds)})")
    lines.append("=" * 70)
    if summary.empty:
        lines.append("(no results)")
    else:
        for exp, g in summary.groupby("experiment", sort=False):
            lines.append("")
            lines.append(f"--- {exp} ---")
            table = pd.DataFrame({
                "variant": g["variant"],
                "AP": g["ap_mean"].map(fmt_pct),
                "+-": g["ap_std"].map(fmt_pct),
                "AP50": g["ap50_mean"].map(fmt_pct),
                "mIoU": g["miou_mean"].map(fmt_pct),
                "fwIoU": g["fwiou_mean"].map(fmt_pct),
                "mACC": g["macc_mean"].map(fmt_pct),
                "seeds": g["n_seeds"],
            })
            lines.append(table.to_string(index=False))
    lines.append("")
    lines.append("=" * 70)
    lines.append("  DIRECTIONAL CHECKS")
    lines.append("=" * 70)
    for c in checks:
        mark = "PASS" if c["passed"] else "FAIL"
        lines.append(f"  [{mark}] {c['claim']}")
        lines.append(f"         {c['detail']}")
    return "\n".join(lines)


def write_experiments(rows, seeds, out_dir: str) -> tuple[str, str]:
    summary = summarize(rows)
    checks = check_claims(summary)
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, REPORT_FILE)
    with open(report_path, "w", encoding="utf-8") as f:
        f.write(build_experiments_report(summary, checks, seeds))
    results_path = os.path.join(out_dir, RESULTS_FILE)
    write_json_atomic({"seeds": list(seeds), "rows": list(rows),
                       "summary": summary.to_dict(orient="records"),
                       "checks": checks}, results_path)
    n_fail = sum(1 for c in checks if not c["passed"])
    logger.info(f"Experiments report -> {report_path} ({len(checks) - n_fail}/{len(checks)} checks passed)")
    return report_path, results_path
