"""Reproducible synthetic multi-part object dataset.

Usage:
    python3 main.py gen --seed 7 --out data/
"""
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import ndimage

import config
from config import SPLIT_TRAIN, SPLIT_VAL, SPLIT_TEST, MIN_PART_AREA
from core.errors import GenerationError
from core.types import AnnotatedSample, PartInstance
from synthdata.templates import DatasetManifest, ObjectTemplate, PartSpec
from utils.helpers import derive_seed

logger = logging.getLogger("ops.synthdata")

MAX_PLACEMENT_ATTEMPTS = 50
RING_INNER_RATIO = 0.55
OBJECT_MARGIN = 1.05        # object frame half-extent incl. jitter slack


# ---- Shape rasterization ----

def _local_coords(shape_hw, center, rotation_deg):
    """Pixel-center grid expressed in a part's rotated local frame."""
    h, w = shape_hw
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    xx += 0.5
    yy += 0.5
    dx, dy = xx - center[0], yy - center[1]
    t = np.deg2rad(rotation_deg)
    c, s = np.cos(t), np.sin(t)
    return c * dx + s * dy, -s * dx + c * dy


def rasterize_part(shape: str, shape_hw, center, half_size, rotation_deg) -> np.ndarray:
    """Bool mask of one part shape; half_size in pixels."""
    lx, ly = _local_coords(shape_hw, center, rotation_deg)
    sx, sy = max(half_size[0], 1e-6), max(half_size[1], 1e-6)
    if shape == "ellipse":
        return (lx / sx) ** 2 + (ly / sy) ** 2 <= 1.0
    if shape == "rectangle":
        return (np.abs(lx) <= sx) & (np.abs(ly) <= sy)
    if shape == "triangle":
        # apex at (0, -sy), base from (-sx, sy) to (sx, sy)
        frac = (ly + sy) / (2 * sy)
        return (ly >= -sy) & (ly <= sy) & (np.abs(lx) <= sx * frac)
    if shape == "ring":
        r = (lx / sx) ** 2 + (ly / sy) ** 2
        return (r <= 1.0) & (r >= RING_INNER_RATIO ** 2)
    raise GenerationError(f"unknown shape {shape!r}")


# ---- Textures ----

def _texture(texture_id: int, shape_hw, rng) -> np.ndarray:
    """Saturated color with a per-texture pattern; distinct from the gray background."""
    trng = np.random.default_rng(1000 + texture_id)
    hue = trng.uniform(0, 1)
    base = _hsv_to_rgb(hue, trng.uniform(0.65, 1.0), trng.uniform(0.55, 0.95))
    alt = _hsv_to_rgb((hue + trng.uniform(0.08, 0.2)) % 1.0, 0.8, trng.uniform(0.3, 0.7))
    h, w = shape_hw
    yy, xx = np.mgrid[0:h, 0:w]
    period = int(trng.integers(4, 9))
    kind = texture_id % 4
    if kind == 0:
        pattern = np.zeros((h, w), dtype=bool)
    elif kind == 1:
        pattern = ((xx + yy) // period) % 2 == 0
    elif kind == 2:
        pattern = ((xx // period) + (yy // period)) % 2 == 0
    else:
        pattern = ((xx % period) - period / 2) ** 2 + ((yy % period) - period / 2) ** 2 < (period / 3) ** 2
    tex = np.where(pattern[..., None], alt, base)
    tex = tex + rng.normal(0, 0.03, size=(h, w, 3))
    return tex


def _hsv_to_rgb(h, s, v) -> np.ndarray:
    i = int(h * 6) % 6
    f = h * 6 - int(h * 6)
    p, q, t = v * (1 - s), v * (1 - f * s), v * (1 - (1 - f) * s)
    return np.array([(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i])


def _background(shape_hw, rng) -> np.ndarray:
    """Low-saturation smoothed noise."""
    h, w = shape_hw
    gray = ndimage.gaussian_filter(rng.normal(0.5, 0.25, size=(h, w)), sigma=2.0)
    tint = rng.uniform(-0.04, 0.04, size=3)
    bg = gray[..., None] + tint + rng.normal(0, 0.02, size=(h, w, 3))
    return np.clip(bg, 0.2, 0.8)


def quantize(image: np.ndarray) -> np.ndarray:
    """Float [0,1] -> uint8 levels -> float32, identical to what a PNG round-trip yields."""
    u8 = np.round(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8)
    return to_float_image(u8)


def to_float_image(u8: np.ndarray) -> np.ndarray:
    return u8.astype(np.float32) / np.float32(255.0)


# ---- Object placement ----

def _place_parts(template: ObjectTemplate, size: int, object_scale, rng) -> list[tuple[PartSpec, np.ndarray]]:
    """Jitter and rasterize all parts; resample until non-overlapping and large enough."""
    for attempt in range(MAX_PLACEMENT_ATTEMPTS):
        radius = size * rng.uniform(*object_scale)
        lo, hi = OBJECT_MARGIN * radius, size - OBJECT_MARGIN * radius
        if hi <= lo:
            continue
        cx, cy = rng.uniform(lo, hi), rng.uniform(lo, hi)
        flip = rng.random() < 0.5

        rendered, occupied, ok = [], np.zeros((size, size), dtype=bool), True
        for spec in template.part_specs:
            dx, dy = spec.anchor
            dx += rng.uniform(-template.anchor_jitter, template.anchor_jitter)
            dy += rng.uniform(-template.anchor_jitter, template.anchor_jitter)
            scale = rng.uniform(*template.scale_jitter)
            rot = spec.rotation + rng.uniform(-template.rotation_jitter, template.rotation_jitter)
            if flip:
                dx, rot = -dx, -rot
            center = (cx + dx * radius, cy + dy * radius)
            half = (spec.size[0] * radius * scale, spec.size[1] * radius * scale)
            m = rasterize_part(spec.shape, (size, size), center, half, rot)
            if m.sum() < MIN_PART_AREA or (m & occupied).any():
                ok = False
                break
            occupied |= m
            rendered.append((spec, m))
        if ok:
            return rendered
        logger.debug(f"template {template.name}: placement attempt {attempt + 1} rejected")
    raise GenerationError(
        f"template {template.name!r} (class {template.class_id}): parts could not be placed "
        f"without overlap after {MAX_PLACEMENT_ATTEMPTS} attempts")


def render_sample(sample_id: int, template: ObjectTemplate, split_tag: str,
                  size: int, object_scale, seed: int) -> AnnotatedSample:
    rng = np.random.default_rng(seed)
    parts = _place_parts(template, size, object_scale, rng)

    image = _background((size, size), rng)
    gt_parts = []
    object_mask = np.zeros((size, size), dtype=bool)
    for spec, m in parts:
        tex = _texture(spec.texture_id, (size, size), rng)
        image[m] = tex[m]
        object_mask |= m
        gt_parts.append(PartInstance(mask=m, score=1.0, class_id=spec.part_class))

    return AnnotatedSample(
        sample_id=sample_id,
        image=quantize(image),
        object_mask=object_mask,
        gt_parts=tuple(gt_parts),
        split_tag=split_tag,
        object_class_id=template.class_id,
    )


def generate(manifest: DatasetManifest, workers: int | None = None) -> list[AnnotatedSample]:
    """Render every split of the manifest; deterministic given manifest.seed."""
    manifest.validate()
    jobs = []
    sample_id = 0
    for split, pool in [(SPLIT_TRAIN, manifest.templates_seen),
                        (SPLIT_VAL, manifest.templates_unseen),
                        (SPLIT_TEST, manifest.templates_unseen)]:
        for i in range(manifest.counts.get(split, 0)):
            template = pool[i % len(pool)]
            jobs.append((sample_id, template, split, derive_seed(manifest.seed, sample_id)))
            sample_id += 1

    def _run(job):
        sid, template, split, seed = job
        return render_sample(sid, template, split, manifest.image_size, manifest.object_scale, seed)

    workers = workers or config.NUM_WORKERS
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(_run, jobs))
    else:
        samples = [_run(j) for j in jobs]

    counts = {s: sum(1 for x in samples if x.split_tag == s) for s in manifest.counts}
    logger.info(f"Generated {len(samples)} samples (seed={manifest.seed}): {counts}")
    return samples


def split_samples(samples, split_tag: str) -> list[AnnotatedSample]:
    return [s for s in samples if s.split_tag == split_tag]
