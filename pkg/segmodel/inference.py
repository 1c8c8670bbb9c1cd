import logging

import numpy as np
import torch

from config import AGNOSTIC_CLASS_ID
from core.masks import upsample_nearest
from core.types import PartInstance, check_image
from segmodel.model import PartSegmenter, QueryOutput, forward

logger = logging.getLogger("ops.segmodel")

DEFAULT_SCORE_THRESHOLD = 0.1


def decode_queries(out: QueryOutput, image_size: tuple[int, int], score_threshold: float,
                   class_aware: bool = False) -> list[PartInstance]:
    """QueryOutput -> PartInstances with score > threshold, non-empty masks, descending score."""
    probs = out.class_probs.detach().cpu().double().numpy()
    logits = out.mask_logits.detach().cpu().double().numpy()
    scores = np.clip(1.0 - probs[:, -1], 0.0, 1.0)

    parts = []
    for q in np.nonzero(scores > score_threshold)[0]:
        # sigmoid(x) > 0.5  <=>  x > 0
        mask = upsample_nearest(logits[q], image_size) > 0.0
        if not mask.any():
            continue
        class_id = int(np.argmax(probs[q, :-1])) + 1 if class_aware else AGNOSTIC_CLASS_ID
        parts.append(PartInstance(mask=mask, score=float(scores[q]), class_id=class_id))
    parts.sort(key=lambda p: -p.score)
    return parts


def infer(model: PartSegmenter, image, score_threshold: float = DEFAULT_SCORE_THRESHOLD) -> list[PartInstance]:
    image = check_image(image)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            _, out = forward(model, image)
    finally:
        model.train(was_training)
    return decode_queries(out, image.shape[:2], score_threshold,
                          class_aware=model.cfg.training_mode == "class_aware")


def infer_batch(model: PartSegmenter, images, score_threshold: float = DEFAULT_SCORE_THRESHOLD) -> list[list[PartInstance]]:
    return [infer(model, im, score_threshold) for im in images]
