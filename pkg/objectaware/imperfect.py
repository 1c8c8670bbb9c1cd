"""Simulated detector masks and per-mode object mask resolution."""
import logging
from dataclasses import dataclass, asdict

import numpy as np
from scipy import ndimage

from config import OBJECT_MASK_MODES
from core.errors import ConfigError
from core.masks import iou, connected_components
from core.types import as_mask
from utils.helpers import derive_seed

logger = logging.getLogger("ops.objectaware")

DEFAULT_RADIUS_RANGE = (-2, 2)
DEFAULT_FLIP_RATE = 0.05
DEFAULT_DROP_RATE = 0.1

_STRUCT8 = ndimage.generate_binary_structure(2, 2)


@dataclass(frozen=True)
class MaskQuality:
    kind: str = "imperfect"
    radius_range: tuple[int, int] = DEFAULT_RADIUS_RANGE   # negative = erosion
    boundary_flip_rate: float = DEFAULT_FLIP_RATE
    component_drop_rate: float = DEFAULT_DROP_RATE
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("perfect", "imperfect"):
            raise ConfigError(f"MaskQuality.kind must be perfect or imperfect, got {self.kind!r}")
        lo, hi = self.radius_range
        if lo > hi:
            raise ConfigError(f"radius_range {self.radius_range} is empty")
        if not (0 <= self.boundary_flip_rate <= 1 and 0 <= self.component_drop_rate <= 1):
            raise ConfigError("flip and drop rates must be within [0,1]")
        if self.kind == "perfect" and not self.is_zero:
            raise ConfigError("perfect MaskQuality must have an all-zero perturbation")

    @property
    def is_zero(self) -> bool:
        return (tuple(self.radius_range) == (0, 0) and self.boundary_flip_rate == 0
                and self.component_drop_rate == 0)

    @classmethod
    def perfect(cls, seed: int = 0) -> "MaskQuality":
        return cls(kind="perfect", radius_range=(0, 0), boundary_flip_rate=0.0,
                   component_drop_rate=0.0, seed=seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["radius_range"] = list(self.radius_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MaskQuality":
        return cls(kind=d.get("kind", "imperfect"),
                   radius_range=tuple(d.get("radius_range", DEFAULT_RADIUS_RANGE)),
                   boundary_flip_rate=d.get("boundary_flip_rate", DEFAULT_FLIP_RATE),
                   component_drop_rate=d.get("component_drop_rate", DEFAULT_DROP_RATE),
                   seed=d.get("seed", 0))


def simulate_imperfect(object_mask, q: MaskQuality, seed: int | None = None) -> tuple[np.ndarray, float]:
    """Perturb an object mask the way an off-the-shelf detector might.

    Steps: morphological dilation (r > 0) or erosion (r < 0) by |r| 8-connected
    iterations, random flips inside the 1-px band around the boundary, random
    removal of whole connected components. Returns (mask, IoU with the input).
    """
    m = as_mask(object_mask).copy()
    if q.kind == "perfect" or q.is_zero:
        return m, (1.0 if m.any() else 0.0)
    rng = np.random.default_rng(q.seed if seed is None else seed)

    r = int(rng.integers(q.radius_range[0], q.radius_range[1] + 1))
    out = m
    if r > 0:
        out = ndimage.binary_dilation(m, structure=_STRUCT8, iterations=r)
    elif r < 0:
        out = ndimage.binary_erosion(m, structure=_STRUCT8, iterations=-r)

    if q.boundary_flip_rate > 0:
        band = (ndimage.binary_dilation(out, structure=_STRUCT8)
                & ~ndimage.binary_erosion(out, structure=_STRUCT8))
        flips = band & (rng.random(out.shape) < q.boundary_flip_rate)
        out = out ^ flips

    if q.component_drop_rate > 0:
        for comp in connected_components(out, connectivity=8):
            if rng.random() < q.component_drop_rate:
                out = out & ~comp

    return out, iou(out, m)


def resolve_object_mask(sample, mode: str, quality: MaskQuality | None = None) -> np.ndarray | None:
    """Object mask a model sees for a sample under an object-mask mode.

    none -> None; perfect -> ground truth; imperfect -> simulated, seeded by
    (quality.seed, sample_id) so every stage sees the same mask for an image.
    """
    if mode not in OBJECT_MASK_MODES:
        raise ConfigError(f"object mask mode must be one of {OBJECT_MASK_MODES}, got {mode!r}")
    if mode == "none":
        return None
    if mode == "perfect":
        return sample.object_mask
    q = quality or MaskQuality()
    mask, _ = simulate_imperfect(sample.object_mask, q, seed=derive_seed(q.seed, sample.sample_id))
    return mask


def mask_quality_report(samples, quality: MaskQuality) -> dict:
    """Mean/min IoU of simulated masks against ground truth over a sample set."""
    ious = [simulate_imperfect(s.object_mask, quality, seed=derive_seed(quality.seed, s.sample_id))[1]
            for s in samples]
    if not ious:
        return {"n": 0, "mean_iou": None, "min_iou": None}
    report = {"n": len(ious), "mean_iou": float(np.mean(ious)), "min_iou": float(np.min(ious))}
    logger.info(f"Simulated object masks: mean IoU {report['mean_iou']:.3f} over {len(ious)} samples")
    return report
