"""Baseline dispatch: segment inside the object mask and emit score-1 PartInstances."""
import logging
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import ndimage

from config import AGNOSTIC_CLASS_ID
from core.errors import ConfigError, DimensionError
from core.types import PartInstance, as_mask, check_image
from baselines.felzenszwalb import felzenszwalb
from baselines.ncut import ncut, MAX_SIDE_LIMIT
from baselines.slic import slic

logger = logging.getLogger("ops.baselines")

METHODS = ("slic", "felzenszwalb", "ncut")

DEFAULT_PARAMS = {
    "slic": {"n_segments": 10, "compactness": 10.0},
    "felzenszwalb": {"k": 100.0, "sigma": 0.8, "min_size": 20},
    "ncut": {"n_cuts": 5, "sigma_color": 0.1, "sigma_space": 4.0, "max_side": 48},
}

_FUNCS = {"slic": slic, "felzenszwalb": felzenszwalb, "ncut": ncut}


@dataclass
class BaselineConfig:
    method: str = "felzenszwalb"
    params: dict = field(default_factory=dict)
    seed: int = 0

    def resolved(self) -> dict:
        return {**DEFAULT_PARAMS[self.method], **self.params}

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown baseline method {self.method!r}; expected one of {METHODS}")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.method])
        if unknown:
            raise ConfigError(f"{self.method}: unknown params {sorted(unknown)}")
        p = self.resolved()
        for key, val in p.items():
            # felzenszwalb sigma == 0 disables smoothing
            if key == "sigma" and val == 0:
                continue
            if val <= 0:
                raise ConfigError(f"{self.method}.{key} must be > 0, got {val}")
        if self.method == "ncut" and p["max_side"] > MAX_SIDE_LIMIT:
            raise ConfigError(f"ncut.max_side must be <= {MAX_SIDE_LIMIT}, got {p['max_side']}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineConfig":
        return cls(method=d["method"], params=dict(d.get("params", {})), seed=int(d.get("seed", 0)))


def fill_unlabeled(labels: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Give every in-mask pixel without a label (-1) the label of its nearest labeled pixel."""
    labels = labels.copy()
    holes = mask & (labels < 0)
    if not holes.any():
        return labels
    known = labels >= 0
    if not known.any():
        labels[mask] = 0
        return labels
    _, (iy, ix) = ndimage.distance_transform_edt(~known, return_indices=True)
    labels[holes] = labels[iy[holes], ix[holes]]
    return labels


def labels_to_parts(labels: np.ndarray) -> list[PartInstance]:
    parts = []
    for lab in np.unique(labels[labels >= 0]):
        parts.append(PartInstance(mask=labels == lab, score=1.0, class_id=AGNOSTIC_CLASS_ID))
    return parts


def run_baseline(image, object_mask, cfg: BaselineConfig) -> list[PartInstance]:
    """Segments of the object mask as class-agnostic parts; they partition the mask exactly."""
    cfg.validate()
    image = check_image(image)
    mask = as_mask(object_mask)
    if mask.shape != image.shape[:2]:
        raise DimensionError(f"object mask {mask.shape} does not match image {image.shape[:2]}")
    if not mask.any():
        return []
    labels = _FUNCS[cfg.method](image[..., :3], mask, **cfg.resolved())
    labels = fill_unlabeled(labels, mask)
    labels[~mask] = -1
    parts = labels_to_parts(labels)
    logger.debug(f"{cfg.method}: {len(parts)} segments over {int(mask.sum())} px")
    return parts
