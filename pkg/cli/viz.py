"""Static overlay panels: input | object mask | gt | predictions | cluster map | pseudo labels."""
import os
import logging

import numpy as np
from PIL import Image, ImageDraw

logger = logging.getLogger("ops.cli")

ALPHA = 0.55
HEADER = 14
GAP = 2


def part_palette(n: int, seed: int = 0) -> np.ndarray:
    """n distinct-ish RGB colours, deterministic for a seed."""
    rng = np.random.default_rng(seed)
    hues = (np.arange(n) / max(n, 1) + rng.uniform(0, 1)) % 1.0
    out = np.zeros((n, 3), dtype=np.uint8)
    for i, hue in enumerate(hues):
        out[i] = _hue_rgb(hue)
    return out


def _hue_rgb(hue: float) -> np.ndarray:
    k = (np.array([5.0, 3.0, 1.0]) + hue * 6.0) % 6.0
    rgb = 1.0 - np.clip(np.minimum(k, 4.0 - k), 0.0, 1.0)
    return np.round((0.25 + 0.75 * rgb) * 255).astype(np.uint8)


def _base(image: np.ndarray) -> np.ndarray:
    return np.round(np.asarray(image)[..., :3] * 255).astype(np.uint8)


def overlay_masks(image: np.ndarray, masks: list, palette: np.ndarray) -> np.ndarray:
    """Blend each mask in its palette colour over a dimmed copy of the image."""
    out = _base(image).astype(np.float64) * 0.6
    for m, c in zip(masks, palette):
        m = np.asarray(m, dtype=bool)
        out[m] = (1 - ALPHA) * out[m] + ALPHA * c
    return np.round(out).clip(0, 255).astype(np.uint8)


def overlay_labels(image: np.ndarray, labels: np.ndarray, seed: int = 0) -> np.ndarray:
    """Colour a label map (-1 = unlabeled) over the image."""
    labs = [l for l in np.unique(labels) if l >= 0]
    pal = part_palette(int(max(labs, default=-1)) + 1, seed)
    return overlay_masks(image, [labels == l for l in labs], pal[labs] if labs else pal)


def _panel(arr: np.ndarray, title: str) -> Image.Image:
    h, w = arr.shape[:2]
    canvas = Image.new("RGB", (w, h + HEADER), (255, 255, 255))
    canvas.paste(Image.fromarray(arr), (0, HEADER))
    ImageDraw.Draw(canvas).text((2, 1), title, fill=(0, 0, 0))
    return canvas


def render_panels(sample, preds: list | None = None, seen_mask=None, cluster_labels=None,
                  pseudo: list | None = None, seed: int = 0) -> tuple[Image.Image, list[str]]:
    """Side-by-side panels for one sample; panels without data are omitted."""
    image = sample.image
    panels = [("input", _base(image))]
    obj = sample.object_mask if seen_mask is None else seen_mask
    panels.append(("object mask", overlay_masks(image, [obj], np.array([[255, 255, 255]]))))

    gt = [p.mask for p in sample.gt_parts]
    panels.append(("gt parts", overlay_masks(image, gt, part_palette(len(gt), seed))))
    if preds is not None:
        panels.append(("predictions", overlay_masks(image, [p.mask for p in preds],
                                                    part_palette(len(preds), seed))))
    if cluster_labels is not None:
        panels.append(("clusters", overlay_labels(image, cluster_labels, seed)))
    if pseudo is not None:
        panels.append(("pseudo labels", overlay_masks(image, [p.mask for p in pseudo],
                                                      part_palette(len(pseudo), seed))))

    tiles = [_panel(arr, title) for title, arr in panels]
    width = sum(t.width for t in tiles) + GAP * (len(tiles) - 1)
    out = Image.new("RGB", (width, tiles[0].height), (255, 255, 255))
    x = 0
    for t in tiles:
        out.paste(t, (x, 0))
        x += t.width + GAP
    return out, [title for title, _ in panels]


def save_panels(sample, out_dir: str, **kw) -> str:
    os.makedirs(out_dir, exist_ok=True)
    img, names = render_panels(sample, **kw)
    path = os.path.join(out_dir, f"{sample.sample_id:06d}.png")
    img.save(path, format="PNG")
    logger.debug(f"Panels {names} -> {path}")
    return path
