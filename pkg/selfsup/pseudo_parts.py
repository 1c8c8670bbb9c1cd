import numpy as np

from config import PSEUDO_PART_MIN_AREA
from core.masks import connected_components, upsample_nearest
from core.types import PartInstance
from selfsup.kmeans import ClusterResult


def extract_pseudo_parts(cr: ClusterResult, min_area: int = PSEUDO_PART_MIN_AREA,
                         image_size: tuple[int, int] | None = None) -> list[PartInstance]:
    """8-connected blobs of every cluster with at least min_area feature pixels.

    Areas are measured on the feature grid; masks are upsampled to image_size
    when given. Order: cluster index, then component label order.
    """
    parts = []
    for i in range(cr.k):
        region = cr.assignments == i
        if not region.any():
            continue
        for comp in connected_components(region, connectivity=8):
            if int(comp.sum()) < min_area:
                continue
            mask = upsample_nearest(comp, image_size) if image_size else comp
            parts.append(PartInstance(mask=mask, score=1.0, class_id=None))
    return parts


def label_map(cr: ClusterResult, image_size: tuple[int, int] | None = None) -> np.ndarray:
    """Assignment grid (int, -1 excluded), optionally upsampled to image resolution."""
    if image_size is None:
        return cr.assignments.copy()
    return upsample_nearest(cr.assignments, image_size)
