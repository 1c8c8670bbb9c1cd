"""Mask geometry: IoU, connected components, resampling."""
import numpy as np
from scipy import ndimage

from core.errors import DimensionError
from core.types import as_mask

_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def mask_area(m) -> int:
    return int(np.count_nonzero(m))


def iou(a, b) -> float:
    """|a∩b| / |a∪b|; 0.0 when both masks are empty."""
    a, b = as_mask(a), as_mask(b)
    if a.shape != b.shape:
        raise DimensionError(f"iou: mask sizes differ {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def iou_matrix(preds: list, gts: list) -> np.ndarray:
    """Pairwise IoU between two lists of bool masks -> (len(preds), len(gts))."""
    if not preds or not gts:
        return np.zeros((len(preds), len(gts)))
    p = np.stack([as_mask(m).ravel() for m in preds]).astype(np.float64)
    g = np.stack([as_mask(m).ravel() for m in gts]).astype(np.float64)
    if p.shape[1] != g.shape[1]:
        raise DimensionError("iou_matrix: mask sizes differ")
    inter = p @ g.T
    union = p.sum(1)[:, None] + g.sum(1)[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, inter / np.where(union > 0, union, 1), 0.0)
    return out


def connected_components(m, connectivity: int = 8) -> list[np.ndarray]:
    """Split a mask into its connected components (4- or 8-connected)."""
    if connectivity not in _STRUCTURES:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    m = as_mask(m)
    labels, n = ndimage.label(m, structure=_STRUCTURES[connectivity])
    return [labels == i for i in range(1, n + 1)]


def union_masks(masks, shape: tuple[int, int]) -> np.ndarray:
    out = np.zeros(shape, dtype=bool)
    for m in masks:
        out |= as_mask(m)
    return out


def downsample_mask(m, size: tuple[int, int]) -> np.ndarray:
    """Majority vote over blocks when the size divides evenly, nearest otherwise."""
    m = as_mask(m)
    h, w = m.shape
    hf, wf = size
    if h % hf == 0 and w % wf == 0:
        bh, bw = h // hf, w // wf
        return m.reshape(hf, bh, wf, bw).mean(axis=(1, 3)) >= 0.5
    rows = np.minimum((np.arange(hf) + 0.5) * h / hf, h - 1).astype(int)
    cols = np.minimum((np.arange(wf) + 0.5) * w / wf, w - 1).astype(int)
    return m[np.ix_(rows, cols)]


def upsample_nearest(arr: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbour resize of a 2-D array (labels, masks or logits)."""
    h, w = arr.shape[:2]
    H, W = size
    if (h, w) == (H, W):
        return arr.copy()
    rows = np.minimum(np.arange(H) * h // H, h - 1)
    cols = np.minimum(np.arange(W) * w // W, w - 1)
    return arr[np.ix_(rows, cols)]
