"""Domain types: images, masks, part instances, annotated samples."""
from dataclasses import dataclass, field, replace

import numpy as np

from config import AGNOSTIC_CLASS_ID, SPLITS
from core.errors import DimensionError, DatasetError


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def check_image(image: np.ndarray) -> np.ndarray:
    """Validate an ImageTensor: HxWxC float in [0,1], H,W >= 8, C in {3,4}."""
    image = np.asarray(image)
    if image.ndim != 3:
        raise DimensionError(f"image must be HxWxC, got shape {image.shape}")
    h, w, c = image.shape
    if h < 8 or w < 8:
        raise DimensionError(f"image must be at least 8x8, got {h}x{w}")
    if c not in (3, 4):
        raise DimensionError(f"image must have 3 or 4 channels, got {c}")
    if not np.all(np.isfinite(image)) or image.min() < 0.0 or image.max() > 1.0:
        raise ValueError("image values must be finite and within [0,1]")
    return image


def as_mask(mask) -> np.ndarray:
    """Coerce to a 2-D bool BinaryMask."""
    m = np.asarray(mask)
    if m.ndim != 2:
        raise DimensionError(f"mask must be 2-D, got shape {m.shape}")
    return m.astype(bool, copy=False)


@dataclass(frozen=True, eq=False)
class PartInstance:
    """A binary part mask with a confidence score and optional class id."""
    mask: np.ndarray
    score: float = 1.0
    class_id: int | None = AGNOSTIC_CLASS_ID

    def __post_init__(self):
        object.__setattr__(self, "mask", _frozen(as_mask(self.mask)))
        object.__setattr__(self, "score", float(self.score))
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0,1], got {self.score}")

    @property
    def area(self) -> int:
        return int(self.mask.sum())

    def with_mask(self, mask) -> "PartInstance":
        return replace(self, mask=mask)

    def with_class(self, class_id) -> "PartInstance":
        return replace(self, class_id=class_id)

    def agnostic(self) -> "PartInstance":
        return replace(self, class_id=AGNOSTIC_CLASS_ID)


@dataclass(frozen=True, eq=False)
class AnnotatedSample:
    sample_id: int
    image: np.ndarray
    object_mask: np.ndarray
    gt_parts: tuple = field(default_factory=tuple)
    split_tag: str = SPLITS[0]
    object_class_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "image", _frozen(check_image(self.image)))
        object.__setattr__(self, "object_mask", _frozen(as_mask(self.object_mask)))
        object.__setattr__(self, "gt_parts", tuple(self.gt_parts))
        if self.split_tag not in SPLITS:
            raise ValueError(f"unknown split_tag {self.split_tag!r}")

    @property
    def size(self) -> tuple[int, int]:
        return self.image.shape[0], self.image.shape[1]


def validate_sample(sample: AnnotatedSample, tolerance: int = 0) -> None:
    """Check the AnnotatedSample invariants; raise DatasetError naming the sample.

    tolerance: number of gt-part pixels allowed outside the object mask.
    """
    if sample.image.shape[2] != 3:
        raise DatasetError(f"sample {sample.sample_id}: image must be 3-channel")
    if sample.object_mask.shape != sample.size:
        raise DatasetError(
            f"sample {sample.sample_id}: object mask {sample.object_mask.shape} "
            f"!= image {sample.size}")
    for i, part in enumerate(sample.gt_parts):
        if part.mask.shape != sample.size:
            raise DatasetError(f"sample {sample.sample_id}: part {i} mask size mismatch")
        if part.score != 1.0:
            raise DatasetError(f"sample {sample.sample_id}: gt part {i} has score {part.score}")
        outside = int((part.mask & ~sample.object_mask).sum())
        if outside > tolerance:
            raise DatasetError(
                f"sample {sample.sample_id}: part {i} has {outside} pixels outside the object mask")
