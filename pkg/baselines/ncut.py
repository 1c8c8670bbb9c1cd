"""Recursive two-way normalized cuts over the pixels of an object mask."""
import logging

import numpy as np
from scipy import linalg
from skimage.transform import resize

logger = logging.getLogger("ops.baselines")

MAX_SIDE = 48
MAX_SIDE_LIMIT = 64
RADIUS = 5.0
_EPS = 1e-12


def ncut_value(w: np.ndarray, part: np.ndarray) -> float:
    """cut(A,B)/assoc(A,V) + cut(A,B)/assoc(B,V) for the boolean split `part`."""
    a, b = part, ~part
    if not a.any() or not b.any():
        return np.inf
    cut = w[np.ix_(a, b)].sum()
    assoc_a = w[a].sum()
    assoc_b = w[b].sum()
    return float(cut / max(assoc_a, _EPS) + cut / max(assoc_b, _EPS))


def ncut_bipartition(w: np.ndarray) -> tuple[np.ndarray, float]:
    """Spectral 2-way cut: second-smallest eigenvector of D^-1/2 (D - W) D^-1/2,
    mapped back by D^-1/2 and thresholded at the split point with the lowest ncut."""
    n = w.shape[0]
    if n < 2:
        return np.zeros(n, dtype=bool), np.inf
    d = w.sum(1)
    d2 = 1.0 / np.sqrt(np.maximum(d, _EPS))
    lap = d2[:, None] * (np.diag(d) - w) * d2[None, :]
    _, vecs = linalg.eigh(lap, subset_by_index=[0, 1])
    y = d2 * vecs[:, 1]

    values = np.unique(y)
    if len(values) < 2:
        return np.zeros(n, dtype=bool), np.inf
    best, best_val = None, np.inf
    for t in (values[:-1] + values[1:]) / 2:
        part = y > t
        val = ncut_value(w, part)
        if val < best_val:
            best, best_val = part, val
    # orient so node 0 sits on the False side
    if best[0]:
        best = ~best
    return best, best_val


def recursive_ncut(w: np.ndarray, n_cuts: int) -> np.ndarray:
    """Split the largest splittable segment until n_cuts segments exist. Returns node labels."""
    n = w.shape[0]
    segments = [np.arange(n)]
    frozen = set()
    while len(segments) < n_cuts:
        candidates = [i for i, s in enumerate(segments) if len(s) >= 2 and i not in frozen]
        if not candidates:
            break
        i = max(candidates, key=lambda j: len(segments[j]))
        nodes = segments[i]
        part, val = ncut_bipartition(w[np.ix_(nodes, nodes)])
        if not np.isfinite(val):
            frozen.add(i)
            continue
        segments[i] = nodes[~part]
        segments.append(nodes[part])
    labels = np.empty(n, dtype=np.int64)
    for lab, nodes in enumerate(segments):
        labels[nodes] = lab
    return labels


def affinity(colors: np.ndarray, coords: np.ndarray, sigma_color: float, sigma_space: float,
             radius: float = RADIUS) -> np.ndarray:
    """exp(-|dc|^2/sc^2) * exp(-|dx|^2/ss^2) for pixel pairs closer than radius."""
    dc = ((colors[:, None, :] - colors[None]) ** 2).sum(-1)
    dx = ((coords[:, None, :] - coords[None]) ** 2).sum(-1)
    w = np.exp(-dc / sigma_color ** 2) * np.exp(-dx / sigma_space ** 2)
    w[dx >= radius ** 2] = 0.0
    np.fill_diagonal(w, 0.0)
    return w


def ncut(image: np.ndarray, mask: np.ndarray, n_cuts: int = 5, sigma_color: float = 0.1,
         sigma_space: float = 4.0, max_side: int = MAX_SIDE) -> np.ndarray:
    """Label map over the mask (-1 outside). The mask bbox is downscaled to max_side before
    the eigen solve and labels are upsampled back with nearest-neighbour lookup."""
    mask = np.asarray(mask, dtype=bool)
    labels = np.full(mask.shape, -1, dtype=np.int64)
    if not mask.any():
        return labels
    max_side = min(max_side, MAX_SIDE_LIMIT)
    ys, xs = np.nonzero(mask)
    y0, y1, x0, x1 = ys.min(), ys.max() + 1, xs.min(), xs.max() + 1
    crop_img = np.asarray(image, dtype=np.float64)[y0:y1, x0:x1, :3]
    crop_mask = mask[y0:y1, x0:x1]
    h, w = crop_mask.shape
    scale = min(1.0, max_side / max(h, w))
    sh, sw = max(1, int(round(h * scale))), max(1, int(round(w * scale)))

    small_img = resize(crop_img, (sh, sw), order=1, anti_aliasing=scale < 1, preserve_range=True)
    small_mask = resize(crop_mask.astype(np.float64), (sh, sw), order=0, anti_aliasing=False) > 0.5
    if not small_mask.any():
        labels[mask] = 0
        return labels

    sy, sx = np.nonzero(small_mask)
    coords = np.stack([sy, sx], axis=1).astype(np.float64)
    w_mat = affinity(small_img[sy, sx], coords, sigma_color, sigma_space * scale)
    node_labels = recursive_ncut(w_mat, n_cuts)
    logger.debug(f"ncut: {len(sy)} nodes at {sh}x{sw}, {node_labels.max() + 1} segments")

    small = np.full((sh, sw), -1, dtype=np.int64)
    small[sy, sx] = node_labels
    ry = np.minimum((np.arange(h) * sh / h).astype(int), sh - 1)
    rx = np.minimum((np.arange(w) * sw / w).astype(int), sw - 1)
    up = small[np.ix_(ry, rx)]
    up[~crop_mask] = -1
    labels[y0:y1, x0:x1] = up
    return labels
