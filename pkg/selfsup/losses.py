"""Self-supervised part losses over clustered pixel features.

L_c pushes cluster centroids apart, L_a pulls pixel features toward their
own centroid; L_SS = lambda_c * L_c + lambda_a * L_a. Cluster assignments
are constants; centroids are re-expressed as differentiable means of the
assigned features, so gradients reach the feature map through both terms.
"""
import logging
from dataclasses import dataclass, asdict

import numpy as np
import torch

from core.errors import ConfigError
from selfsup.kmeans import ClusterResult, kmeans, normalize

logger = logging.getLogger("ops.selfsup")

# Defaults
K_CLUSTERS = 10
TAU_C = 1.0
TAU_A = 1.0
LAMBDA_C = 10.0
LAMBDA_A = 0.5
KMEANS_ITERS = 10
KMEANS_RESTARTS = 3
EXP_CLAMP = 30.0


@dataclass
class SSConfig:
    K: int = K_CLUSTERS
    tau_c: float = TAU_C
    tau_a: float = TAU_A
    lambda_c: float = LAMBDA_C
    lambda_a: float = LAMBDA_A
    normalize_features: bool = True
    restrict_to_object: bool = True
    kmeans_iters: int = KMEANS_ITERS
    kmeans_restarts: int = KMEANS_RESTARTS
    seed: int = 0

    def validate(self):
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.K < 2:
            logger.warning("SSConfig.K < 2: the contrastive term is always zero")
        if self.tau_c <= 0 or self.tau_a <= 0:
            raise ConfigError("tau_c and tau_a must be > 0")
        if self.kmeans_iters < 1 or self.kmeans_restarts < 1:
            raise ConfigError("kmeans_iters and kmeans_restarts must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SSConfig":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def loss_contrastive(centroids: torch.Tensor, tau_c: float = TAU_C) -> torch.Tensor:
    """(1/K) * sum over ordered pairs i != j of exp(-||c_i - c_j||^2 / tau_c)."""
    c = torch.as_tensor(centroids)
    k = c.shape[0]
    if k < 2:
        return c.sum() * 0.0
    d2 = (c[:, None, :] - c[None, :, :]).pow(2).sum(-1)
    off = ~torch.eye(k, dtype=torch.bool, device=c.device)
    return torch.exp(-d2[off] / tau_c).sum() / k


def cluster_means(cr: ClusterResult, fm: torch.Tensor) -> tuple[torch.Tensor, list[int]]:
    """Differentiable centroids of the populated clusters and their cluster ids."""
    d = fm.shape[0]
    flat = fm.reshape(d, -1).T
    labels = torch.as_tensor(cr.assignments.ravel(), device=fm.device)
    ids = [i for i in range(cr.k) if cr.counts[i] > 0]
    if not ids:
        return flat.new_zeros((0, d)), ids
    means = torch.stack([flat[labels == i].mean(0) for i in ids])
    return means, ids


def loss_affinity(cr: ClusterResult, fm: torch.Tensor, tau_a: float = TAU_A) -> torch.Tensor:
    """(1/K') * sum_i (1/N_i) * sum_m exp(||c_i - p_m||^2 / tau_a) over the K' populated clusters."""
    fm = torch.as_tensor(fm)
    d = fm.shape[0]
    flat = fm.reshape(d, -1).T
    labels = torch.as_tensor(cr.assignments.ravel(), device=fm.device)
    terms = []
    for i in range(cr.k):
        members = flat[labels == i]
        if len(members) == 0:
            continue
        c = members.mean(0)
        e = ((members - c) ** 2).sum(-1) / tau_a
        terms.append(torch.exp(e.clamp(max=EXP_CLAMP)).mean())
    if not terms:
        return fm.sum() * 0.0
    return torch.stack(terms).mean()


def prepare_features(fm: torch.Tensor, cfg: SSConfig):
    """Features fed to clustering and the losses, plus the zero-vector exclusion grid."""
    if cfg.normalize_features:
        return normalize(fm)
    return fm, None


def terms_from_clusters(feats: torch.Tensor, cr: ClusterResult, cfg: SSConfig) -> dict:
    centroids, _ = cluster_means(cr, feats)
    lc = loss_contrastive(centroids, cfg.tau_c)
    la = loss_affinity(cr, feats, cfg.tau_a)
    return {"total": cfg.lambda_c * lc + cfg.lambda_a * la, "loss_c": lc, "loss_a": la}


def loss_ss_terms(fm: torch.Tensor, mask, cfg: SSConfig) -> tuple[dict, ClusterResult]:
    """Run normalize -> kmeans -> L_c, L_a. Returns ({total, loss_c, loss_a}, ClusterResult)."""
    feats, excluded = prepare_features(fm, cfg)
    cr = kmeans(feats, mask, cfg, excluded=excluded)
    return terms_from_clusters(feats, cr, cfg), cr


def loss_ss(fm: torch.Tensor, mask, cfg: SSConfig) -> torch.Tensor:
    terms, _ = loss_ss_terms(fm, mask, cfg)
    return terms["total"]


def centroid_spread(cr: ClusterResult, fm) -> dict:
    """Min pairwise centroid distance and mean member-to-centroid distance."""
    arr = fm.detach().cpu().double().numpy() if isinstance(fm, torch.Tensor) else np.asarray(fm, dtype=np.float64)
    flat = arr.reshape(arr.shape[0], -1).T
    labels = cr.assignments.ravel()
    ids = [i for i in range(cr.k) if cr.counts[i] > 0]
    means = np.stack([flat[labels == i].mean(0) for i in ids])
    if len(means) >= 2:
        dist = np.sqrt(((means[:, None, :] - means[None, :, :]) ** 2).sum(-1))
        min_sep = float(dist[~np.eye(len(means), dtype=bool)].min())
    else:
        min_sep = 0.0
    within = [np.sqrt(((flat[labels == i] - m) ** 2).sum(-1)) for i, m in zip(ids, means)]
    return {"min_centroid_distance": min_sep,
            "mean_within_distance": float(np.concatenate(within).mean())}
