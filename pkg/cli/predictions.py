"""Prediction interchange file shared by model inference and the baselines."""
import logging

from config import AGNOSTIC_CLASS_ID
from core.errors import DatasetError
from core.types import PartInstance
from utils.helpers import encode_bitmask, decode_bitmask, read_json, write_json_atomic

logger = logging.getLogger("ops.cli")

FORMAT_VERSION = 1


def save_predictions(preds: dict, sizes: dict, path: str, split: str | None = None,
                     source: str | None = None):
    """preds: {image_id: [PartInstance]}, sizes: {image_id: (h, w)}."""
    images = []
    for sid in sorted(preds):
        h, w = sizes[sid]
        images.append({
            "image_id": int(sid),
            "size": [int(h), int(w)],
            "parts": [{"score": p.score, "class_id": p.class_id, "mask_b64": encode_bitmask(p.mask)}
                      for p in preds[sid]],
        })
    doc = {"format_version": FORMAT_VERSION, "split": split, "source": source, "images": images}
    write_json_atomic(doc, path)
    n = sum(len(v) for v in preds.values())
    logger.info(f"Saved {n} predictions on {len(images)} images -> {path}")


def load_predictions(path: str) -> dict:
    """Inverse of save_predictions: {image_id: [PartInstance]}."""
    doc = read_json(path)
    preds = {}
    try:
        for rec in doc["images"]:
            sid = int(rec["image_id"])
            if sid in preds:
                raise DatasetError(f"{path}: duplicate image_id {sid}")
            h, w = rec["size"]
            try:
                preds[sid] = [PartInstance(mask=decode_bitmask(p["mask_b64"], h, w), score=p["score"],
                                           class_id=p.get("class_id", AGNOSTIC_CLASS_ID))
                              for p in rec["parts"]]
            except ValueError as e:
                raise DatasetError(f"{path}: image {sid}: bad mask ({e})")
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetError(f"{path}: malformed predictions file ({e})")
    return preds
