"""Pre-aware input composition, post-aware output filtering, background probe."""
import logging

import numpy as np

from config import POSTAWARE_MIN_AREA
from core.errors import DimensionError
from core.masks import downsample_mask
from core.types import as_mask

logger = logging.getLogger("ops.objectaware")


def compose_preaware(image: np.ndarray, object_mask) -> np.ndarray:
    """HxWx3 image + object mask -> HxWx4 with the mask as channel 3 in {0,1}."""
    image = np.asarray(image)
    m = as_mask(object_mask)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DimensionError(f"compose_preaware expects an HxWx3 image, got {image.shape}")
    if m.shape != image.shape[:2]:
        raise DimensionError(f"object mask {m.shape} does not match image {image.shape[:2]}")
    return np.concatenate([image, m[..., None].astype(image.dtype)], axis=2)


def strip_preaware(image: np.ndarray) -> np.ndarray:
    return np.asarray(image)[..., :3]


def postaware_filter(parts, object_mask, min_area: int = POSTAWARE_MIN_AREA) -> list:
    """Clip every part to the object mask; drop those left with fewer than min_area pixels."""
    m = as_mask(object_mask)
    out = []
    for p in parts:
        if p.mask.shape != m.shape:
            raise DimensionError(f"part mask {p.mask.shape} does not match object mask {m.shape}")
        clipped = p.mask & m
        if int(clipped.sum()) < min_area:
            continue
        out.append(p if np.array_equal(clipped, p.mask) else p.with_mask(clipped))
    return out


def background_probe(background_prob, mask_logits, object_mask) -> dict:
    """Mean per-query P(BG) for queries whose mask lies mostly inside vs outside the object.

    background_prob: (Q,) array; mask_logits: (Q, Hf, Wf); object_mask: bool at image
    or feature resolution. A query counts as "inside" when more than half of its
    positive-logit pixels fall inside the object.
    """
    bg = np.asarray(background_prob, dtype=np.float64)
    logits = np.asarray(mask_logits)
    fm_size = logits.shape[-2:]
    m = as_mask(object_mask)
    if m.shape != fm_size:
        m = downsample_mask(m, fm_size)

    inside, outside, empty = [], [], 0
    for q in range(logits.shape[0]):
        pos = logits[q] > 0
        n = int(pos.sum())
        if n == 0:
            empty += 1
            continue
        (inside if (pos & m).sum() / n > 0.5 else outside).append(bg[q])
    return {
        "n_inside": len(inside),
        "n_outside": len(outside),
        "n_empty": empty,
        "mean_bg_inside": float(np.mean(inside)) if inside else None,
        "mean_bg_outside": float(np.mean(outside)) if outside else None,
    }
