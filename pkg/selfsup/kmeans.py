"""Per-image k-means over pixel embeddings (k-means++ init, Lloyd iterations, restarts)."""
import logging
from dataclasses import dataclass, field

import numpy as np
import torch

from core.errors import KMeansError
from core.masks import downsample_mask
from core.types import as_mask
from utils.helpers import derive_seed

logger = logging.getLogger("ops.selfsup")

INERTIA_TOL = 1e-9


@dataclass
class ClusterResult:
    assignments: np.ndarray          # (Hf, Wf) int, -1 = excluded
    centroids: np.ndarray            # (K, D)
    counts: np.ndarray               # (K,)
    inertia: float
    inertia_history: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.centroids)

    @property
    def grid_size(self) -> tuple[int, int]:
        return self.assignments.shape

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "centroids": self.centroids.tolist(),
            "counts": self.counts.tolist(),
            "inertia": self.inertia,
            "inertia_history": list(self.inertia_history),
        }


def normalize(fm):
    """Scale every pixel vector of a (D, Hf, Wf) map to unit norm.

    Returns (normalized map, excluded) where excluded flags zero vectors,
    which stay zero.
    """
    t = fm if isinstance(fm, torch.Tensor) else torch.as_tensor(np.asarray(fm))
    norm = torch.linalg.vector_norm(t, dim=0, keepdim=True)
    excluded = norm[0] == 0
    safe = torch.where(excluded.unsqueeze(0), torch.ones_like(norm), norm)
    out = torch.where(excluded.unsqueeze(0), torch.zeros_like(t), t / safe)
    return out, excluded


def eligible_pixels(grid_size, mask=None, excluded=None) -> np.ndarray:
    """Bool (Hf, Wf) grid of pixels taking part in clustering."""
    keep = np.ones(grid_size, dtype=bool)
    if mask is not None:
        m = as_mask(mask)
        if m.shape != tuple(grid_size):
            m = downsample_mask(m, grid_size)
        keep &= m
    if excluded is not None:
        ex = excluded.cpu().numpy() if isinstance(excluded, torch.Tensor) else np.asarray(excluded)
        keep &= ~ex.astype(bool)
    return keep


# ---- Lloyd iterations ----

def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(-1)


def _kmeans_pp(x: np.ndarray, k: int, rng) -> np.ndarray:
    n = len(x)
    centers = [x[int(rng.integers(n))]]
    d2 = ((x - centers[0]) ** 2).sum(-1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(-1))
    return np.array(centers, dtype=np.float64)


def _assign(x, c):
    d2 = _sq_dists(x, c)
    labels = np.argmin(d2, axis=1)          # ties -> lowest index
    return labels, float(d2[np.arange(len(x)), labels].sum()), d2


def _update(x, labels, c, d2):
    """Means for populated clusters; empty clusters reseeded at the farthest points."""
    k = len(c)
    new = c.copy()
    counts = np.bincount(labels, minlength=k)
    for i in np.nonzero(counts)[0]:
        new[i] = x[labels == i].mean(axis=0)
    empty = np.nonzero(counts == 0)[0]
    if len(empty):
        dist = d2[np.arange(len(x)), labels]
        order = np.argsort(-dist, kind="stable")
        for i, idx in zip(empty, order):
            new[i] = x[idx]
    return new


def _check_monotone(history, value):
    if history and value > history[-1] + INERTIA_TOL * max(1.0, abs(history[-1])):
        raise KMeansError(f"k-means inertia increased from {history[-1]:.9g} to {value:.9g}")
    history.append(value)


def lloyd(x: np.ndarray, k: int, iters: int, rng) -> tuple[np.ndarray, np.ndarray, float, list]:
    c = _kmeans_pp(x, k, rng)
    labels, inertia, d2 = _assign(x, c)
    history = [inertia]
    for _ in range(iters):
        c = _update(x, labels, c, d2)
        new_labels, inertia, d2 = _assign(x, c)
        _check_monotone(history, inertia)
        converged = np.array_equal(new_labels, labels)
        labels = new_labels
        if converged:
            break
    # centroids are the means of their final members
    for i in np.unique(labels):
        c[i] = x[labels == i].mean(axis=0)
    final = float(((x - c[labels]) ** 2).sum())
    _check_monotone(history, final)
    return labels, c, final, history


def kmeans(fm, mask, cfg, excluded=None) -> ClusterResult:
    """Cluster the pixel vectors of a (D, Hf, Wf) map; best of cfg.kmeans_restarts runs.

    mask restricts clustering (image or feature resolution); excluded flags
    zero vectors from normalize(). Excluded pixels get assignment -1.
    """
    arr = fm.detach().cpu().double().numpy() if isinstance(fm, torch.Tensor) else np.asarray(fm, dtype=np.float64)
    d, hf, wf = arr.shape
    keep = eligible_pixels((hf, wf), mask if cfg.restrict_to_object else None, excluded)
    x = arr.reshape(d, -1).T[keep.ravel()]
    n = len(x)
    if n == 0:
        raise KMeansError("no eligible pixels to cluster")
    k = cfg.K
    if n < k:
        logger.warning(f"k-means: {n} eligible pixels < K={k}, reducing K to {n}")
        k = n

    best = None
    for r in range(max(1, cfg.kmeans_restarts)):
        rng = np.random.default_rng(derive_seed(cfg.seed, r))
        labels, c, inertia, history = lloyd(x, k, cfg.kmeans_iters, rng)
        if best is None or inertia < best[2]:
            best = (labels, c, inertia, history)

    labels, c, inertia, history = best
    grid = np.full(hf * wf, -1, dtype=np.int64)
    grid[keep.ravel()] = labels
    return ClusterResult(
        assignments=grid.reshape(hf, wf),
        centroids=c,
        counts=np.bincount(labels, minlength=k),
        inertia=inertia,
        inertia_history=history,
    )
