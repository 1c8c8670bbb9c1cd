"""Graph-based segmentation (Felzenszwalb-Huttenlocher) on in-mask 8-connected pixel graphs."""
import numpy as np
from skimage import filters

# (dy, dx) offsets covering each undirected 8-neighbour pair once
_OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))


class Universe:
    """Disjoint-set forest with union by rank and path compression."""

    def __init__(self, num_elements: int):
        self.num = num_elements
        self.parent = np.arange(num_elements)
        self.rank = np.zeros(num_elements, dtype=np.int64)
        self._size = np.ones(num_elements, dtype=np.int64)

    def find(self, x: int) -> int:
        y = x
        while y != self.parent[y]:
            y = self.parent[y]
        while x != y:
            self.parent[x], x = y, self.parent[x]
        return int(y)

    def join(self, x: int, y: int) -> int:
        """Union the roots x and y; returns the new root."""
        if self.rank[x] > self.rank[y]:
            self.parent[y] = x
            self._size[x] += self._size[y]
            root = x
        else:
            self.parent[x] = y
            self._size[y] += self._size[x]
            if self.rank[x] == self.rank[y]:
                self.rank[y] += 1
            root = y
        self.num -= 1
        return root

    def size(self, x: int) -> int:
        return int(self._size[x])


def _threshold(k: float, size: int) -> float:
    return k / size


def segment_graph(num_vertices: int, edges, k: float) -> Universe:
    """Merge components in increasing edge-weight order.

    edges: array-like of (a, b, weight). Two components merge when the edge
    weight is <= min(Int(C1) + k/|C1|, Int(C2) + k/|C2|).
    """
    edges = np.asarray(edges, dtype=np.float64).reshape(-1, 3)
    order = np.argsort(edges[:, 2], kind="mergesort")
    u = Universe(num_vertices)
    threshold = np.full(num_vertices, _threshold(k, 1), dtype=np.float64)
    for a, b, w in edges[order]:
        ra, rb = u.find(int(a)), u.find(int(b))
        if ra == rb:
            continue
        if w <= min(threshold[ra], threshold[rb]):
            root = u.join(ra, rb)
            threshold[root] = w + _threshold(k, u.size(root))
    return u


def merge_small(u: Universe, edges, min_size: int) -> Universe:
    """Join components smaller than min_size along their lightest edges."""
    if min_size <= 1:
        return u
    edges = np.asarray(edges, dtype=np.float64).reshape(-1, 3)
    for a, b, _ in edges[np.argsort(edges[:, 2], kind="mergesort")]:
        ra, rb = u.find(int(a)), u.find(int(b))
        if ra != rb and (u.size(ra) < min_size or u.size(rb) < min_size):
            u.join(ra, rb)
    return u


def _smooth(image: np.ndarray, mask: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian smoothing normalized over the mask so outside colours never leak in."""
    if sigma <= 0:
        return image
    m = mask.astype(np.float64)
    num = filters.gaussian(image * m[..., None], sigma=sigma, channel_axis=-1, preserve_range=True)
    den = filters.gaussian(m, sigma=sigma, preserve_range=True)
    out = image.copy()
    inside = den > 1e-12
    out[inside] = num[inside] / den[inside, None]
    return out


def mask_graph(image: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vertex ids for in-mask pixels (-1 elsewhere) and an (E, 3) edge array with RGB*255 weights."""
    h, w = mask.shape
    index = np.full((h, w), -1, dtype=np.int64)
    index[mask] = np.arange(int(mask.sum()))
    rgb = image[..., :3].astype(np.float64) * 255.0
    edges = []
    for dy, dx in _OFFSETS:
        y0, y1 = 0, h - dy
        x0, x1 = max(0, -dx), w - max(0, dx)
        src = (slice(y0, y1), slice(x0, x1))
        dst = (slice(y0 + dy, y1 + dy), slice(x0 + dx, x1 + dx))
        both = mask[src] & mask[dst]
        if not both.any():
            continue
        a = index[src][both]
        b = index[dst][both]
        wgt = np.sqrt(((rgb[src][both] - rgb[dst][both]) ** 2).sum(-1))
        edges.append(np.stack([a, b, wgt], axis=1))
    if not edges:
        return index, np.zeros((0, 3))
    return index, np.concatenate(edges)


def felzenszwalb(image: np.ndarray, mask: np.ndarray, k: float = 100.0,
                 sigma: float = 0.8, min_size: int = 20) -> np.ndarray:
    """Label map over the mask (labels 0..n-1 in raster order of first pixel, -1 outside)."""
    mask = np.asarray(mask, dtype=bool)
    labels = np.full(mask.shape, -1, dtype=np.int64)
    n = int(mask.sum())
    if n == 0:
        return labels
    smooth = _smooth(np.asarray(image, dtype=np.float64)[..., :3], mask, sigma)
    index, edges = mask_graph(smooth, mask)
    u = segment_graph(n, edges, k)
    u = merge_small(u, edges, min_size)

    roots = np.array([u.find(i) for i in range(n)])
    _, compact = np.unique(roots, return_inverse=True)
    # renumber by first appearance in raster order
    first = {}
    ordered = np.array([first.setdefault(c, len(first)) for c in compact])
    labels[mask] = ordered
    return labels
