"""Pseudo labels from a frozen checkpoint, with provenance tracking."""
import logging
import threading

from config import AGNOSTIC_CLASS_ID
from core.errors import ProvenanceError, DatasetError
from core.types import PartInstance
from objectaware.compose import postaware_filter
from pipeline.data import seen_object_mask, model_image
from segmodel.checkpoint import load_checkpoint
from segmodel.inference import infer
from utils.helpers import encode_bitmask, decode_bitmask, read_json, sha256_file, write_json_atomic

logger = logging.getLogger("ops.pipeline")


class PseudoLabelSet:
    """Per-image pseudo-labeled parts tied to the checkpoint that produced them."""

    def __init__(self, labels: dict, round_id: int, checkpoint_hash: str, threshold: float):
        self._labels = {int(k): list(v) for k, v in labels.items()}
        self.round_id = round_id
        self.checkpoint_hash = checkpoint_hash
        self.threshold = threshold
        self._lock = threading.Lock()
        self.reads = 0

    def get(self, sample_id) -> list[PartInstance]:
        with self._lock:
            self.reads += 1
        return list(self._labels.get(int(sample_id), []))

    @property
    def image_ids(self) -> list[int]:
        return sorted(self._labels)

    def non_empty_ids(self) -> list[int]:
        return [i for i in self.image_ids if self._labels[i]]

    @property
    def n_instances(self) -> int:
        return sum(len(v) for v in self._labels.values())

    def validate(self, checkpoint_path: str | None = None, checkpoint_hash: str | None = None):
        """Check scores against the threshold and the provenance hash against a checkpoint."""
        for sid, parts in self._labels.items():
            for p in parts:
                if not p.score > self.threshold:
                    raise ProvenanceError(f"pseudo label on image {sid} has score {p.score} "
                                          f"<= threshold {self.threshold}")
        expected = checkpoint_hash or (sha256_file(checkpoint_path) if checkpoint_path else None)
        if expected is not None and expected != self.checkpoint_hash:
            raise ProvenanceError(f"pseudo labels round {self.round_id} were produced by checkpoint "
                                  f"{self.checkpoint_hash[:12]}, not {expected[:12]}")

    def to_dict(self) -> dict:
        images = []
        for sid in self.image_ids:
            parts = self._labels[sid]
            size = list(parts[0].mask.shape) if parts else None
            images.append({
                "image_id": sid,
                "size": size,
                "parts": [{"score": p.score, "class_id": p.class_id,
                           "mask_b64": encode_bitmask(p.mask)} for p in parts],
            })
        return {"round": self.round_id, "checkpoint_sha256": self.checkpoint_hash,
                "threshold": self.threshold, "images": images}

    def save(self, path: str):
        write_json_atomic(self.to_dict(), path)
        logger.info(f"Pseudo labels round {self.round_id}: {self.n_instances} instances on "
                    f"{len(self.non_empty_ids())}/{len(self._labels)} images -> {path}")

    @classmethod
    def load(cls, path: str) -> "PseudoLabelSet":
        doc = read_json(path)
        try:
            labels = {}
            for rec in doc["images"]:
                h, w = rec["size"] if rec["size"] else (0, 0)
                labels[rec["image_id"]] = [
                    PartInstance(mask=decode_bitmask(p["mask_b64"], h, w), score=p["score"],
                                 class_id=p.get("class_id", AGNOSTIC_CLASS_ID))
                    for p in rec["parts"]]
            return cls(labels, doc["round"], doc["checkpoint_sha256"], doc["threshold"])
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetError(f"{path}: malformed pseudo-label file ({e})")


def pseudo_label_image(model, sample, cfg, threshold: float) -> list[PartInstance]:
    seen = seen_object_mask(sample, cfg, labeled=False)
    parts = infer(model, model_image(sample, seen), threshold)
    if seen is None:
        return parts
    return postaware_filter(parts, seen)


def generate_pseudo_labels(checkpoint_path: str, unlabeled_set, threshold: float, cfg,
                           round_id: int = 1, model=None) -> PseudoLabelSet:
    """Infer with the frozen checkpoint, then post-aware filter with the mask the model saw, if any.

    gt_parts of the unlabeled samples are never touched.
    """
    digest = sha256_file(checkpoint_path)
    model = model or load_checkpoint(checkpoint_path)
    model.eval()
    labels = {}
    for s in unlabeled_set:
        labels[s.sample_id] = pseudo_label_image(model, s, cfg, threshold)
    pls = PseudoLabelSet(labels, round_id, digest, threshold)
    if pls.n_instances == 0:
        logger.warning(f"Round {round_id}: no pseudo labels above threshold {threshold}")
    return pls
