"""Set-prediction loss: Hungarian matching of queries to ground-truth parts."""
import logging
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from scipy.optimize import linear_sum_assignment

from core.errors import ConfigError
from segmodel.model import ModelConfig, QueryOutput

logger = logging.getLogger("ops.segmodel")


@dataclass
class Matching:
    query_idx: np.ndarray     # matched query indices
    gt_idx: np.ndarray        # matched gt indices, aligned with query_idx
    cost: float               # total assignment cost

    def __len__(self):
        return len(self.query_idx)


def gt_class_index(class_id, cfg: ModelConfig) -> int:
    """Part class id (1-based) -> class-logit index; agnostic mode maps everything to 0."""
    if cfg.training_mode == "class_agnostic" or class_id is None:
        return 0
    idx = int(class_id) - 1
    if not 0 <= idx < cfg.num_part_classes:
        raise ConfigError(f"part class {class_id} outside 1..{cfg.num_part_classes}")
    return idx


def gt_targets(gt: list, feat_size, cfg: ModelConfig, dtype=torch.float32, device="cpu"):
    """Area-downsampled soft target masks (G, Hf, Wf) and class indices (G,)."""
    masks = torch.as_tensor(np.stack([np.asarray(p.mask, dtype=np.float32) for p in gt]),
                            dtype=dtype, device=device)
    masks = F.interpolate(masks.unsqueeze(1), size=tuple(feat_size), mode="area").squeeze(1)
    classes = torch.as_tensor([gt_class_index(p.class_id, cfg) for p in gt],
                              dtype=torch.long, device=device)
    return masks, classes


def _pairwise_bce(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Mean per-pixel BCE for every (query, gt) pair; logits (Q, N), targets (G, N)."""
    n = logits.shape[1]
    pos = F.softplus(-logits)
    neg = F.softplus(logits)
    return (pos @ targets.T + neg @ (1 - targets).T) / n


def _pairwise_dice(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    p = logits.sigmoid()
    num = 2 * (p @ targets.T)
    den = p.sum(-1)[:, None] + targets.sum(-1)[None, :]
    return 1 - (num + 1) / (den + 1)


def matching_cost_matrix(pred: QueryOutput, gt: list, cfg: ModelConfig) -> torch.Tensor:
    """(Q, G) cost: w_cls*(-log p(class)) + w_bce*BCE + w_dice*(1 - Dice)."""
    q = pred.mask_logits.shape[0]
    tgt_masks, tgt_cls = gt_targets(gt, pred.mask_logits.shape[-2:], cfg,
                                    dtype=pred.mask_logits.dtype, device=pred.mask_logits.device)
    with torch.no_grad():
        logp = pred.class_logits.log_softmax(-1)[:, tgt_cls]
        src = pred.mask_logits.reshape(q, -1)
        tgt = tgt_masks.reshape(len(gt), -1)
        return (-cfg.w_cls * logp
                + cfg.w_bce * _pairwise_bce(src, tgt)
                + cfg.w_dice * _pairwise_dice(src, tgt))


def match_and_loss(pred: QueryOutput, gt: list, cfg: ModelConfig) -> tuple[torch.Tensor, Matching]:
    """Optimal bipartite matching + set-prediction loss for one image."""
    q = pred.mask_logits.shape[0]
    if len(gt) > q:
        raise ConfigError(f"{len(gt)} ground-truth parts but only {q} queries; "
                          f"increase num_queries to at least {len(gt)}")
    bg = pred.class_logits.shape[-1] - 1
    target_classes = torch.full((q,), bg, dtype=torch.long, device=pred.class_logits.device)
    weights = torch.ones(bg + 1, dtype=pred.class_logits.dtype, device=pred.class_logits.device)
    weights[bg] = cfg.no_object_weight

    zero = pred.mask_logits.sum() * 0.0
    loss_bce, loss_dice = zero, zero
    if gt:
        cost = matching_cost_matrix(pred, gt, cfg).cpu().numpy()
        rows, cols = linear_sum_assignment(cost)
        matching = Matching(rows, cols, float(cost[rows, cols].sum()))

        tgt_masks, tgt_cls = gt_targets(gt, pred.mask_logits.shape[-2:], cfg,
                                        dtype=pred.mask_logits.dtype, device=pred.mask_logits.device)
        rows_t = torch.as_tensor(rows, dtype=torch.long)
        cols_t = torch.as_tensor(cols, dtype=torch.long)
        target_classes[rows_t] = tgt_cls[cols_t]

        src = pred.mask_logits[rows_t].flatten(1)
        tgt = tgt_masks[cols_t].flatten(1)
        loss_bce = F.binary_cross_entropy_with_logits(src, tgt, reduction="none").mean(1).mean()
        p = src.sigmoid()
        dice = 1 - (2 * (p * tgt).sum(1) + 1) / (p.sum(1) + tgt.sum(1) + 1)
        loss_dice = dice.mean()
    else:
        matching = Matching(np.zeros(0, dtype=int), np.zeros(0, dtype=int), 0.0)

    loss_cls = F.cross_entropy(pred.class_logits, target_classes, weight=weights)
    loss = cfg.w_cls * loss_cls + cfg.w_bce * loss_bce + cfg.w_dice * loss_dice
    return loss, matching
