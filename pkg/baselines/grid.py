"""Parameter sweeps for the baselines, best configuration per method by AP."""
import logging
from concurrent.futures import ThreadPoolExecutor

import config
from baselines.runner import BaselineConfig, run_baseline, METHODS
from core.errors import ConfigError
from metrics.report import full_report
from objectaware.imperfect import MaskQuality, resolve_object_mask

logger = logging.getLogger("ops.baselines")

DEFAULT_GRID = {
    "slic": [{"n_segments": 5}, {"n_segments": 10}],
    "felzenszwalb": [{"k": 50.0}, {"k": 100.0}, {"k": 300.0}],
    "ncut": [{"n_cuts": 5}, {"n_cuts": 10}],
}
GRID_MASKS = ("perfect", "imperfect")


def predict_baseline(samples, cfg: BaselineConfig, mask_mode: str = "perfect",
                     quality: MaskQuality | None = None, workers: int | None = None) -> dict:
    """{sample_id: [PartInstance]} for one baseline configuration."""
    if mask_mode == "none":
        raise ConfigError("baselines need an object mask; use 'perfect' or 'imperfect'")
    cfg.validate()

    def _one(s):
        return s.sample_id, run_baseline(s.image, resolve_object_mask(s, mask_mode, quality), cfg)

    workers = workers or config.NUM_WORKERS
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return dict(pool.map(_one, samples))
    return dict(_one(s) for s in samples)


def run_grid(samples, method: str, masks=GRID_MASKS, grid: list | None = None,
             quality: MaskQuality | None = None, seed: int = 0) -> dict:
    """Sweep one method's grid for each mask mode.

    Returns {mask_mode: {"rows": [{params, report}], "best": {params, report}}}.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown baseline method {method!r}")
    gts = {s.sample_id: list(s.gt_parts) for s in samples}
    out = {}
    for mode in masks:
        rows = []
        for params in grid or DEFAULT_GRID[method]:
            cfg = BaselineConfig(method=method, params=dict(params), seed=seed)
            preds = predict_baseline(samples, cfg, mode, quality)
            report = full_report(preds, gts, class_agnostic=True, semantic=True)
            rows.append({"params": dict(params), "report": report})
            logger.info(f"{method} {params} [{mode} mask]: AP {report.ap * 100:.2f}")
        best = max(rows, key=lambda r: r["report"].ap)
        out[mode] = {"rows": rows, "best": best}
    return out
