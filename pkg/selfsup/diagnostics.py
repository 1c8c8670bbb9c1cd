"""Cluster dumps for --dump-clusters: paletted assignment PNG + centroid JSON."""
import os
import logging

import numpy as np
from PIL import Image

from selfsup.kmeans import ClusterResult
from selfsup.pseudo_parts import label_map
from utils.helpers import write_json_atomic

logger = logging.getLogger("ops.selfsup")

EXCLUDED_INDEX = 255


def cluster_palette(k: int, seed: int = 0) -> list[int]:
    """Flat 256*3 palette; index 255 (excluded pixels) is black."""
    rng = np.random.default_rng(seed)
    colors = rng.integers(40, 256, size=(256, 3))
    colors[EXCLUDED_INDEX] = 0
    return colors.astype(np.uint8).ravel().tolist()


def dump_clusters(cr: ClusterResult, out_dir: str, name: str,
                  image_size: tuple[int, int] | None = None) -> tuple[str, str]:
    """Write <name>_clusters.png and <name>_centroids.json. Returns both paths."""
    os.makedirs(out_dir, exist_ok=True)
    labels = label_map(cr, image_size)
    idx = np.where(labels < 0, EXCLUDED_INDEX, labels).astype(np.uint8)
    im = Image.frombytes("P", (idx.shape[1], idx.shape[0]), idx.tobytes())
    im.putpalette(cluster_palette(cr.k))
    png_path = os.path.join(out_dir, f"{name}_clusters.png")
    im.save(png_path, format="PNG")

    json_path = os.path.join(out_dir, f"{name}_centroids.json")
    write_json_atomic(cr.to_dict(), json_path)
    logger.debug(f"Dumped clusters for {name}: K={cr.k}, inertia={cr.inertia:.4f}")
    return png_path, json_path
