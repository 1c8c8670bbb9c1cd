"""SLIC superpixels restricted to an object mask."""
import logging

import numpy as np
from scipy import ndimage
from skimage import color

from core.masks import connected_components

logger = logging.getLogger("ops.baselines")

MAX_ITER = 10


def _grid_centers(mask: np.ndarray, n_segments: int) -> np.ndarray:
    """Regular grid over the mask bounding box, snapped onto the mask. Returns (n, 2) (y, x)."""
    ys, xs = np.nonzero(mask)
    y0, y1, x0, x1 = ys.min(), ys.max() + 1, xs.min(), xs.max() + 1
    bh, bw = y1 - y0, x1 - x0
    step = np.sqrt(mask.sum() / n_segments)
    ny = max(1, int(round(bh / step)))
    nx = max(1, int(round(bw / step)))
    cy = y0 + (np.arange(ny) + 0.5) * bh / ny
    cx = x0 + (np.arange(nx) + 0.5) * bw / nx
    grid = np.array([(y, x) for y in cy for x in cx])

    # nearest in-mask pixel for every position
    _, (iy, ix) = ndimage.distance_transform_edt(~mask, return_indices=True)
    centers, seen = [], set()
    for y, x in grid:
        py, px = int(min(y, mask.shape[0] - 1)), int(min(x, mask.shape[1] - 1))
        sy, sx = int(iy[py, px]), int(ix[py, px])
        if (sy, sx) in seen:
            continue
        seen.add((sy, sx))
        centers.append((sy, sx))
    return np.array(centers, dtype=np.float64)


def _enforce_connectivity(labels: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Keep the largest component of each label; orphan pieces join their most common neighbour."""
    labels = labels.copy()
    struct = ndimage.generate_binary_structure(2, 1)
    changed = True
    while changed:
        changed = False
        for lab in np.unique(labels[mask]):
            comps = connected_components(labels == lab, connectivity=4)
            if len(comps) <= 1:
                continue
            comps.sort(key=lambda c: -int(c.sum()))
            for comp in comps[1:]:
                ring = ndimage.binary_dilation(comp, structure=struct) & ~comp & mask
                neighbours = labels[ring]
                neighbours = neighbours[neighbours != lab]
                if neighbours.size == 0:
                    continue
                vals, counts = np.unique(neighbours, return_counts=True)
                labels[comp] = vals[np.argmax(counts)]
                changed = True
    return labels


def slic(image: np.ndarray, mask: np.ndarray, n_segments: int = 10, compactness: float = 10.0,
         max_iter: int = MAX_ITER) -> np.ndarray:
    """Label map over the mask (0..n-1, -1 outside) from k-means in (L, a, b, y, x) space."""
    mask = np.asarray(mask, dtype=bool)
    labels = np.full(mask.shape, -1, dtype=np.int64)
    if not mask.any():
        return labels
    lab = color.rgb2lab(np.asarray(image, dtype=np.float64)[..., :3])
    ys, xs = np.nonzero(mask)
    pix_color = lab[ys, xs]
    pix_pos = np.stack([ys, xs], axis=1).astype(np.float64)

    centers_pos = _grid_centers(mask, n_segments)
    centers_color = lab[centers_pos[:, 0].astype(int), centers_pos[:, 1].astype(int)]
    step = max(np.sqrt(mask.sum() / n_segments), 1.0)

    assign = np.zeros(len(ys), dtype=np.int64)
    for _ in range(max_iter):
        dc = ((pix_color[:, None, :] - centers_color[None]) ** 2).sum(-1)
        delta = pix_pos[:, None, :] - centers_pos[None]
        ds = (delta ** 2).sum(-1)
        dist = dc + ds / step ** 2 * compactness ** 2
        # 2S x 2S search window around every center
        window = (np.abs(delta) <= step).all(-1)
        windowed = np.where(window, dist, np.inf)
        covered = np.isfinite(windowed).any(1)
        new_assign = np.where(covered, windowed.argmin(1), dist.argmin(1))
        if np.array_equal(new_assign, assign) and _ > 0:
            break
        assign = new_assign
        for c in range(len(centers_pos)):
            members = assign == c
            if members.any():
                centers_pos[c] = pix_pos[members].mean(0)
                centers_color[c] = pix_color[members].mean(0)

    labels[ys, xs] = assign
    labels = _enforce_connectivity(labels, mask)
    _, compact = np.unique(labels[mask], return_inverse=True)
    labels[mask] = compact
    return labels
