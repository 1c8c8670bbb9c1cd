"""Read/write datasets as dataset.json (COCO-style layout) + lossless PNG images."""
import os
import json
import logging

import numpy as np
from PIL import Image

from config import MIN_PART_AREA
from core.errors import DatasetError
from core.types import AnnotatedSample, PartInstance, validate_sample
from synthdata.generator import to_float_image
from synthdata.templates import PART_CLASS_NAMES
from utils.helpers import encode_bitmask, decode_bitmask, write_json_atomic

logger = logging.getLogger("ops.synthdata")

DATASET_FILE = "dataset.json"
IMAGE_DIR = "images"
FORMAT_VERSION = 1


def save_dataset(samples, path: str, manifest=None) -> str:
    """Write images/<id>.png and dataset.json under path. Returns the json path."""
    os.makedirs(os.path.join(path, IMAGE_DIR), exist_ok=True)
    images, annotations = [], []
    part_classes, object_classes = set(), set()
    ann_id = 0

    for s in samples:
        h, w = s.size
        file_name = f"{IMAGE_DIR}/{s.sample_id:06d}.png"
        u8 = np.round(np.asarray(s.image) * 255).astype(np.uint8)
        Image.fromarray(u8).save(os.path.join(path, file_name), format="PNG")
        images.append({
            "id": s.sample_id, "file": file_name, "height": h, "width": w,
            "split": s.split_tag, "object_class": s.object_class_id,
        })
        object_classes.add(s.object_class_id)

        annotations.append(_annotation(ann_id, s.sample_id, s.object_mask, None, True))
        ann_id += 1
        for part in s.gt_parts:
            annotations.append(_annotation(ann_id, s.sample_id, part.mask, part.class_id, False))
            part_classes.add(part.class_id)
            ann_id += 1

    doc = {
        "info": {"format_version": FORMAT_VERSION,
                 "manifest": manifest.to_dict() if manifest is not None else None},
        "images": images,
        "annotations": annotations,
        "categories": [{"id": c, "name": PART_CLASS_NAMES.get(c, f"part_{c}")}
                       for c in sorted(c for c in part_classes if c is not None)],
        "object_categories": sorted(object_classes),
    }
    json_path = os.path.join(path, DATASET_FILE)
    write_json_atomic(doc, json_path)
    logger.info(f"Saved {len(samples)} samples, {len(annotations)} annotations -> {json_path}")
    return json_path


def _annotation(ann_id, image_id, mask, part_class, is_object):
    return {
        "id": ann_id, "image_id": image_id, "part_class": part_class,
        "bitmask_b64": encode_bitmask(mask), "is_object_mask": is_object,
    }


def load_dataset(path: str, strict: bool = False) -> list[AnnotatedSample]:
    """Load a dataset written by save_dataset.

    strict=False: part pixels outside the object mask are clipped with a warning.
    strict=True: any invariant violation raises DatasetError.
    """
    json_path = path if path.endswith(".json") else os.path.join(path, DATASET_FILE)
    root = os.path.dirname(json_path)
    try:
        with open(json_path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise DatasetError(f"dataset file not found: {json_path}")
    except json.JSONDecodeError as e:
        raise DatasetError(f"malformed JSON in {json_path}: {e}")

    try:
        images = doc["images"]
        annotations = doc["annotations"]
    except (KeyError, TypeError):
        raise DatasetError(f"{json_path}: missing 'images' or 'annotations' array")

    by_image = {}
    for i, ann in enumerate(annotations):
        if not isinstance(ann, dict):
            raise DatasetError(f"{json_path}: annotations[{i}] is not an object: {ann!r}")
        by_image.setdefault(ann.get("image_id"), []).append(ann)

    samples = []
    for i, rec in enumerate(images):
        if not isinstance(rec, dict):
            raise DatasetError(f"{json_path}: images[{i}] is not an object: {rec!r}")
        samples.append(_load_sample(rec, by_image.get(rec.get("id"), []), root, strict))
    logger.info(f"Loaded {len(samples)} samples from {json_path}")
    return samples


def _load_sample(rec: dict, anns: list, root: str, strict: bool) -> AnnotatedSample:
    sid = rec.get("id")
    try:
        h, w = int(rec["height"]), int(rec["width"])
        file_name = rec["file"]
    except (KeyError, TypeError, ValueError):
        raise DatasetError(f"sample {sid}: image record missing height/width/file")

    img_path = os.path.join(root, file_name)
    if not os.path.exists(img_path):
        raise DatasetError(f"sample {sid}: missing image file {file_name}")
    with Image.open(img_path) as im:
        u8 = np.asarray(im.convert("RGB"))
    if u8.shape[:2] != (h, w):
        raise DatasetError(f"sample {sid}: image {file_name} is {u8.shape[1]}x{u8.shape[0]}, "
                           f"annotation says {w}x{h}")

    object_mask, parts = None, []
    for ann in anns:
        try:
            m = decode_bitmask(ann["bitmask_b64"], h, w)
        except (KeyError, ValueError) as e:
            raise DatasetError(f"sample {sid}: annotation {ann.get('id')}: bad mask ({e})")
        if ann.get("is_object_mask"):
            object_mask = m
        else:
            parts.append((ann.get("id"), ann.get("part_class"), m))
    if object_mask is None:
        raise DatasetError(f"sample {sid}: no object mask annotation")

    gt_parts = []
    for ann_id, part_class, m in parts:
        outside = int((m & ~object_mask).sum())
        if outside:
            if strict:
                raise DatasetError(f"sample {sid}: part annotation {ann_id} has "
                                   f"{outside} pixels outside the object mask")
            logger.warning(f"sample {sid}: part annotation {ann_id} clipped to object mask "
                           f"({outside} pixels outside)")
            m = m & object_mask
        if m.sum() < MIN_PART_AREA:
            if strict:
                raise DatasetError(f"sample {sid}: part annotation {ann_id} area {int(m.sum())} "
                                   f"< {MIN_PART_AREA}")
            logger.warning(f"sample {sid}: part annotation {ann_id} below minimum area")
        gt_parts.append(PartInstance(mask=m, score=1.0, class_id=part_class))

    try:
        sample = AnnotatedSample(
            sample_id=sid, image=to_float_image(u8), object_mask=object_mask,
            gt_parts=tuple(gt_parts), split_tag=rec.get("split"),
            object_class_id=rec.get("object_class", 0),
        )
    except ValueError as e:
        raise DatasetError(f"sample {sid}: {e}")
    validate_sample(sample, tolerance=0)
    return sample
