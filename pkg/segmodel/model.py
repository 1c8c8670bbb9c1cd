"""Small query-based part segmenter: conv encoder -> H/4 pixel embeddings -> query masks."""
import math
from dataclasses import dataclass, asdict, fields

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from core.errors import ConfigError

TRAINING_MODES = ("class_agnostic", "class_aware")


@dataclass
class ModelConfig:
    channels_in: int = 3
    embed_dim: int = 64                 # D
    num_queries: int = 16               # Q
    training_mode: str = "class_agnostic"
    num_part_classes: int = 1           # class-aware only
    widths: tuple[int, int] = (32, 64)  # first two encoder stages; the third is D
    seed: int = 0
    # set-prediction loss weights
    w_cls: float = 2.0
    w_bce: float = 5.0
    w_dice: float = 5.0
    no_object_weight: float = 0.1

    def validate(self):
        if self.channels_in not in (3, 4):
            raise ConfigError(f"channels_in must be 3 or 4, got {self.channels_in}")
        if self.training_mode not in TRAINING_MODES:
            raise ConfigError(f"training_mode must be one of {TRAINING_MODES}")
        if self.training_mode == "class_aware" and self.num_part_classes < 1:
            raise ConfigError("class_aware mode needs num_part_classes >= 1")
        if self.embed_dim < 2 or self.num_queries < 1:
            raise ConfigError("embed_dim >= 2 and num_queries >= 1 required")

    @property
    def preaware(self) -> bool:
        return self.channels_in == 4

    @property
    def num_classes(self) -> int:
        """Foreground class count; the class head has num_classes + 1 logits."""
        return 1 if self.training_mode == "class_agnostic" else self.num_part_classes

    def to_dict(self) -> dict:
        d = asdict(self)
        d["widths"] = list(self.widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        kw = {k: v for k, v in d.items() if k in known}
        if "widths" in kw:
            kw["widths"] = tuple(kw["widths"])
        return cls(**kw)


@dataclass
class QueryOutput:
    mask_logits: torch.Tensor     # (Q, Hf, Wf)
    class_logits: torch.Tensor    # (Q, C + 1), last index = background

    @property
    def class_probs(self) -> torch.Tensor:
        return self.class_logits.softmax(-1)

    @property
    def background_prob(self) -> torch.Tensor:
        return self.class_probs[:, -1]

    @property
    def scores(self) -> torch.Tensor:
        return 1.0 - self.background_prob


def _groups(c: int) -> int:
    return math.gcd(8, c)


def _conv_block(c_in: int, c_out: int, stride: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1),
        nn.GroupNorm(_groups(c_out), c_out),
        nn.SiLU(),
        nn.Conv2d(c_out, c_out, 3, padding=1),
        nn.GroupNorm(_groups(c_out), c_out),
        nn.SiLU(),
    )


class PartSegmenter(nn.Module):
    """3 strided stages (widths[0], widths[1], D) + one upsampling stage back to H/4.

    Each query is a learned D-vector; mask logits are its dot product with the
    pixel embeddings. One mask-pooling refinement makes queries image-dependent
    before the class head.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        w1, w2 = cfg.widths
        d = cfg.embed_dim
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(cfg.seed)
            # +2 coordinate channels appended internally
            self.stage1 = _conv_block(cfg.channels_in + 2, w1, stride=2)
            self.stage2 = _conv_block(w1, w2, stride=2)
            self.stage3 = _conv_block(w2, d, stride=2)
            self.lateral = nn.Conv2d(w2, d, 1)
            self.fuse = nn.Sequential(
                nn.Conv2d(d, d, 3, padding=1),
                nn.GroupNorm(_groups(d), d),
                nn.SiLU(),
                nn.Conv2d(d, d, 1),
            )
            self.queries = nn.Embedding(cfg.num_queries, d)
            self.query_mlp = nn.Sequential(nn.Linear(d, d), nn.SiLU(), nn.Linear(d, d))
            self.class_head = nn.Linear(d, cfg.num_classes + 1)
        if cfg.training_mode == "class_agnostic":
            assert self.class_head.out_features == 2

    def features(self, x: torch.Tensor) -> torch.Tensor:
        b, _, h, w = x.shape
        ys = torch.linspace(-1.0, 1.0, h, dtype=x.dtype, device=x.device)
        xs = torch.linspace(-1.0, 1.0, w, dtype=x.dtype, device=x.device)
        gy, gx = torch.meshgrid(ys, xs, indexing="ij")
        coords = torch.stack([gx, gy]).unsqueeze(0).expand(b, -1, -1, -1)
        x = torch.cat([x, coords], dim=1)
        x1 = self.stage1(x)
        x2 = self.stage2(x1)
        x3 = self.stage3(x2)
        up = F.interpolate(x3, size=x2.shape[-2:], mode="nearest")
        return self.fuse(up + self.lateral(x2))

    def forward(self, x: torch.Tensor):
        """x: (B, C, H, W) -> features (B, D, Hf, Wf), mask logits (B, Q, Hf, Wf), class logits (B, Q, C+1)."""
        if x.shape[1] != self.cfg.channels_in:
            raise ConfigError(f"input has {x.shape[1]} channels, model expects {self.cfg.channels_in}")
        feats = self.features(x)
        b, d, hf, wf = feats.shape
        flat = feats.flatten(2)                                     # (B, D, N)
        q0 = self.queries.weight.unsqueeze(0).expand(b, -1, -1)     # (B, Q, D)
        q1 = q0 + self.query_mlp(self._pool(q0, flat))
        mask_logits = torch.einsum("bqd,bdn->bqn", q1, flat)
        pooled = self._pool_weights(mask_logits, flat)
        class_logits = self.class_head(q1 + pooled)
        return feats, mask_logits.view(b, -1, hf, wf), class_logits

    def _pool(self, q, flat):
        return self._pool_weights(torch.einsum("bqd,bdn->bqn", q, flat), flat)

    @staticmethod
    def _pool_weights(logits, flat):
        w = logits.sigmoid()
        return torch.einsum("bqn,bdn->bqd", w, flat) / (w.sum(-1, keepdim=True) + 1e-6)


def image_to_tensor(image: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    """HxWxC numpy image -> (C, H, W) tensor."""
    return torch.as_tensor(np.ascontiguousarray(np.asarray(image).transpose(2, 0, 1)), dtype=dtype)


def forward(model: PartSegmenter, image) -> tuple[torch.Tensor, QueryOutput]:
    """Single-image forward: FeatureMap (D, Hf, Wf) and QueryOutput."""
    x = image if isinstance(image, torch.Tensor) else image_to_tensor(image)
    if x.ndim == 3 and x.shape[0] not in (3, 4) and x.shape[-1] in (3, 4):
        x = x.permute(2, 0, 1)
    channels = x.shape[0]
    if channels != model.cfg.channels_in:
        raise ConfigError(f"image has {channels} channels, model expects {model.cfg.channels_in}")
    dtype = next(model.parameters()).dtype
    feats, masks, logits = model(x.unsqueeze(0).to(dtype))
    return feats[0], QueryOutput(mask_logits=masks[0], class_logits=logits[0])
