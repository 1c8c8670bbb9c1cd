"""Training schedules and the full OPS run configuration."""
from dataclasses import dataclass, field, asdict

from config import OBJECT_MASK_MODES
from core.errors import ConfigError
from objectaware.imperfect import MaskQuality
from segmodel.model import ModelConfig
from selfsup.losses import SSConfig

# ---- Desk-scale schedule ----
BASE_ITERATIONS = 3000
BASE_LR = 1e-3
BASE_MILESTONES = (2000, 2700)
FINETUNE_ITERATIONS = 600
FINETUNE_LR = 1e-4
BATCH_SIZE = 8
LR_GAMMA = 0.1
WEIGHT_DECAY = 1e-4
MIX_RATIO = 0.5
PSEUDO_LABEL_THRESHOLD = 0.1
SCALE_JITTER = (0.75, 1.25)
LOG_EVERY = 50

STAGES = ("base", "finetune")
PROTOCOLS = ("transductive", "cross_split")
POSTAWARE_MASK_MODES = ("perfect", "imperfect")


@dataclass
class TrainConfig:
    stage: str = "base"
    batch_size: int = BATCH_SIZE
    iterations: int = BASE_ITERATIONS
    learning_rate: float = BASE_LR
    milestones: tuple = BASE_MILESTONES
    gamma: float = LR_GAMMA
    weight_decay: float = WEIGHT_DECAY
    mix_ratio: float = MIX_RATIO
    pseudo_label_threshold: float = PSEUDO_LABEL_THRESHOLD
    rounds: int = 1
    enable_ss: bool = True
    enable_st: bool = True
    augment: bool = True
    scale_jitter: tuple = SCALE_JITTER
    seed: int = 0
    log_every: int = LOG_EVERY

    @classmethod
    def base(cls, **kw) -> "TrainConfig":
        return cls(stage="base", **kw)

    @classmethod
    def finetune(cls, **kw) -> "TrainConfig":
        kw.setdefault("iterations", FINETUNE_ITERATIONS)
        kw.setdefault("learning_rate", FINETUNE_LR)
        kw.setdefault("milestones", ())
        return cls(stage="finetune", **kw)

    def validate(self):
        if self.stage not in STAGES:
            raise ConfigError(f"stage must be one of {STAGES}, got {self.stage!r}")
        if self.stage == "finetune" and not (self.enable_ss or self.enable_st):
            raise ConfigError("finetune stage needs at least one of enable_ss / enable_st")
        if not 0.0 < self.pseudo_label_threshold < 1.0:
            raise ConfigError(f"pseudo_label_threshold must be in (0,1), got {self.pseudo_label_threshold}")
        if self.batch_size < 1 or self.iterations < 0:
            raise ConfigError("batch_size >= 1 and iterations >= 0 required")
        if not 0.0 <= self.mix_ratio <= 1.0:
            raise ConfigError(f"mix_ratio must be in [0,1], got {self.mix_ratio}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.rounds < 0:
            raise ConfigError("rounds must be >= 0")
        lo, hi = self.scale_jitter
        if not 0 < lo <= hi:
            raise ConfigError(f"scale_jitter {self.scale_jitter} is invalid")

    @property
    def n_supervised(self) -> int:
        """Supervised slots per fine-tune batch; the rest go to self-supervision.

        Labeled images always feed the supervised slots; enable_st only adds
        pseudo-labeled images to that pool.
        """
        if self.stage == "base" or not self.enable_ss:
            return self.batch_size
        return int(round(self.batch_size * self.mix_ratio))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["milestones"] = list(self.milestones)
        d["scale_jitter"] = list(self.scale_jitter)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        kw = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        for key in ("milestones", "scale_jitter"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return cls(**kw)


@dataclass
class OPSConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    base: TrainConfig = field(default_factory=TrainConfig.base)
    finetune: TrainConfig = field(default_factory=TrainConfig.finetune)
    ss: SSConfig = field(default_factory=SSConfig)
    object_mask: str = "none"
    mask_quality: MaskQuality = field(default_factory=MaskQuality)
    post_aware: bool = False
    postaware_mask: str = "perfect"     # mask source for post-aware on 3-channel models
    protocol: str = "transductive"
    score_threshold: float = PSEUDO_LABEL_THRESHOLD
    dump_clusters: bool = False
    seed: int = 0

    @property
    def rounds(self) -> int:
        return self.finetune.rounds

    def validate(self):
        self.model.validate()
        self.base.validate()
        if self.rounds > 0:
            self.finetune.validate()
        self.ss.validate()
        if self.object_mask not in OBJECT_MASK_MODES:
            raise ConfigError(f"object_mask must be one of {OBJECT_MASK_MODES}")
        if self.object_mask == "none" and self.model.preaware:
            raise ConfigError("a 4-channel (pre-aware) model needs --object-mask perfect or imperfect")
        if self.object_mask != "none" and not self.model.preaware:
            raise ConfigError(f"--object-mask {self.object_mask} requires a 4-channel model")
        if self.postaware_mask not in POSTAWARE_MASK_MODES:
            raise ConfigError(f"postaware_mask must be one of {POSTAWARE_MASK_MODES}")
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}")

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "base": self.base.to_dict(),
            "finetune": self.finetune.to_dict(),
            "ss": self.ss.to_dict(),
            "object_mask": self.object_mask,
            "mask_quality": self.mask_quality.to_dict(),
            "post_aware": self.post_aware,
            "postaware_mask": self.postaware_mask,
            "protocol": self.protocol,
            "score_threshold": self.score_threshold,
            "dump_clusters": self.dump_clusters,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OPSConfig":
        return cls(
            model=ModelConfig.from_dict(d.get("model", {})),
            base=TrainConfig.from_dict(d.get("base", {"stage": "base"})),
            finetune=TrainConfig.from_dict(d.get("finetune", {"stage": "finetune"})),
            ss=SSConfig.from_dict(d.get("ss", {})),
            object_mask=d.get("object_mask", "none"),
            mask_quality=MaskQuality.from_dict(d.get("mask_quality", {})),
            post_aware=d.get("post_aware", False),
            postaware_mask=d.get("postaware_mask", "perfect"),
            protocol=d.get("protocol", "transductive"),
            score_threshold=d.get("score_threshold", PSEUDO_LABEL_THRESHOLD),
            dump_clusters=d.get("dump_clusters", False),
            seed=d.get("seed", 0),
        )
