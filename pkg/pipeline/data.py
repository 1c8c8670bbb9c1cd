"""Model inputs, augmentation and deterministic batch assembly."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import torch
from scipy import ndimage

import config
from objectaware.compose import compose_preaware
from objectaware.imperfect import resolve_object_mask
from segmodel.model import image_to_tensor
from utils.helpers import derive_seed

logger = logging.getLogger("ops.pipeline")


@dataclass
class Example:
    tensor: torch.Tensor        # (C, H, W)
    parts: list                 # supervised targets, empty for SS slots
    region: np.ndarray          # SS clustering region
    sample_id: int


def seen_object_mask(sample, cfg, labeled: bool):
    """Object mask fed to a pre-aware model; None for 3-channel models.

    Labeled images use their annotated mask, all others the configured mode.
    """
    if not cfg.model.preaware:
        return None
    if labeled:
        return sample.object_mask
    return resolve_object_mask(sample, cfg.object_mask, cfg.mask_quality)


def region_mask(sample, seen):
    """Region the model was shown: its object mask, or the whole image when it saw none."""
    return seen if seen is not None else np.ones(sample.size, dtype=bool)


def model_image(sample, seen) -> np.ndarray:
    if seen is None:
        return sample.image
    return compose_preaware(sample.image, seen)


# ---- Augmentation ----

def _fit(arr: np.ndarray, size: tuple[int, int], offset: tuple[int, int], pad_mode: str) -> np.ndarray:
    """Crop (offset >= 0) or pad (offset < 0) the leading two axes to size."""
    h, w = size
    oy, ox = offset
    if oy >= 0:
        arr = arr[oy:oy + h]
    else:
        pad = [(-oy, h - arr.shape[0] + oy)] + [(0, 0)] * (arr.ndim - 1)
        arr = np.pad(arr, pad, mode=pad_mode)
    if ox >= 0:
        arr = arr[:, ox:ox + w]
    else:
        pad = [(0, 0), (-ox, w - arr.shape[1] + ox)] + [(0, 0)] * (arr.ndim - 2)
        arr = np.pad(arr, pad, mode=pad_mode)
    return arr


def augment(image: np.ndarray, masks: list, rng, scale_jitter=(0.75, 1.25)):
    """Horizontal flip + scale jitter with random crop/pad back to the input size."""
    h, w = image.shape[:2]
    if rng.random() < 0.5:
        image = image[:, ::-1]
        masks = [m[:, ::-1] for m in masks]
    s = rng.uniform(*scale_jitter)
    nh, nw = max(1, int(round(h * s))), max(1, int(round(w * s)))
    if (nh, nw) != (h, w):
        image = ndimage.zoom(image, (nh / h, nw / w, 1), order=1, mode="nearest")
        masks = [ndimage.zoom(m.astype(np.uint8), (nh / h, nw / w), order=0).astype(bool) for m in masks]
        nh, nw = image.shape[:2]

    def _offset(n, full):
        return int(rng.integers(0, n - full + 1)) if n >= full else -int(rng.integers(0, full - n + 1))

    off = (_offset(nh, h), _offset(nw, w))
    image = np.clip(_fit(image, (h, w), off, "edge"), 0.0, 1.0)
    masks = [_fit(m, (h, w), off, "constant") for m in masks]
    return np.ascontiguousarray(image), [np.ascontiguousarray(m) for m in masks]


def make_example(sample, parts, seen, rng, tcfg) -> Example:
    region = region_mask(sample, seen)
    image = sample.image
    masks = [region] + ([seen] if seen is not None else []) + [p.mask for p in parts]
    if tcfg.augment:
        image, masks = augment(image, masks, rng, tcfg.scale_jitter)
    region_aug = masks[0]
    seen_aug = masks[1] if seen is not None else None
    part_masks = masks[2:] if seen is not None else masks[1:]
    kept = [p.with_mask(m) for p, m in zip(parts, part_masks) if m.any()]
    if seen_aug is not None:
        image = compose_preaware(image, seen_aug)
    return Example(tensor=image_to_tensor(image), parts=kept, region=region_aug,
                   sample_id=sample.sample_id)


def build_examples(jobs: list, seed: int, step: int, tcfg, workers: int | None = None) -> list[Example]:
    """jobs: [(sample, parts, seen)]; slot i uses rng seeded by (seed, step, i)."""
    def _run(i_job):
        i, (sample, parts, seen) = i_job
        rng = np.random.default_rng(derive_seed(seed, step, i))
        return make_example(sample, parts, seen, rng, tcfg)

    workers = workers or config.NUM_WORKERS
    items = list(enumerate(jobs))
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run, items))
    return [_run(x) for x in items]


def stack(examples: list[Example]) -> torch.Tensor:
    return torch.stack([e.tensor for e in examples])
