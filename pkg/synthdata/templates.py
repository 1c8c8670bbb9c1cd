"""Object templates and dataset manifests for the synthetic part dataset.

Templates live in an object frame where the object spans roughly [-1, 1]
on both axes (y grows downward). Part class ids are semantic roles shared
across templates: 1 torso, 2 head, 3 leg, 4 tail, 5 wing/fin/arm,
6 wheel (ring shape, unseen templates only).
"""
from dataclasses import dataclass, field, asdict

from config import SPLIT_TRAIN, SPLIT_VAL, SPLIT_TEST, IMAGE_SIZE
from core.errors import ConfigError

SHAPES = ("ellipse", "rectangle", "triangle", "ring")

PART_CLASS_NAMES = {
    1: "torso", 2: "head", 3: "leg", 4: "tail", 5: "limb", 6: "wheel",
}

MIN_PARTS, MAX_PARTS = 2, 8


@dataclass(frozen=True)
class PartSpec:
    shape: str
    anchor: tuple[float, float]          # (dx, dy) in the object frame
    size: tuple[float, float]            # (sx, sy) half-extents in the object frame
    texture_id: int
    part_class: int
    rotation: float = 0.0                # degrees

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ConfigError(f"unknown part shape {self.shape!r}")


@dataclass(frozen=True)
class ObjectTemplate:
    class_id: int
    name: str
    part_specs: tuple[PartSpec, ...]
    rotation_jitter: float = 6.0         # degrees, per part
    scale_jitter: tuple[float, float] = (0.92, 1.08)
    anchor_jitter: float = 0.02

    def validate(self):
        n = len(self.part_specs)
        if not MIN_PARTS <= n <= MAX_PARTS:
            raise ConfigError(f"template {self.name}: {n} parts, expected {MIN_PARTS}..{MAX_PARTS}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectTemplate":
        specs = tuple(PartSpec(shape=p["shape"], anchor=tuple(p["anchor"]),
                               size=tuple(p["size"]), texture_id=p["texture_id"],
                               part_class=p["part_class"], rotation=p.get("rotation", 0.0))
                      for p in d["part_specs"])
        return cls(class_id=d["class_id"], name=d["name"], part_specs=specs,
                   rotation_jitter=d.get("rotation_jitter", 6.0),
                   scale_jitter=tuple(d.get("scale_jitter", (0.92, 1.08))),
                   anchor_jitter=d.get("anchor_jitter", 0.02))


@dataclass
class DatasetManifest:
    seed: int
    templates_seen: list
    templates_unseen: list
    counts: dict = field(default_factory=lambda: {SPLIT_TRAIN: 400, SPLIT_VAL: 60, SPLIT_TEST: 60})
    image_size: int = IMAGE_SIZE
    object_scale: tuple[float, float] = (0.28, 0.40)   # object radius / image side

    def validate(self):
        for t in list(self.templates_seen) + list(self.templates_unseen):
            t.validate()
        seen = {t.class_id for t in self.templates_seen}
        unseen = {t.class_id for t in self.templates_unseen}
        if seen & unseen:
            raise ConfigError(f"seen/unseen object classes overlap: {sorted(seen & unseen)}")
        if self.counts.get(SPLIT_TRAIN, 0) > 0 and not self.templates_seen:
            raise ConfigError("train_seen count > 0 but no seen templates")
        if (self.counts.get(SPLIT_VAL, 0) or self.counts.get(SPLIT_TEST, 0)) and not self.templates_unseen:
            raise ConfigError("unseen split count > 0 but no unseen templates")
        if self.image_size < 32:
            raise ConfigError(f"image_size {self.image_size} too small for the template library")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "templates_seen": [t.to_dict() for t in self.templates_seen],
            "templates_unseen": [t.to_dict() for t in self.templates_unseen],
            "counts": dict(self.counts),
            "image_size": self.image_size,
            "object_scale": list(self.object_scale),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        return cls(
            seed=d["seed"],
            templates_seen=[ObjectTemplate.from_dict(t) for t in d["templates_seen"]],
            templates_unseen=[ObjectTemplate.from_dict(t) for t in d["templates_unseen"]],
            counts=dict(d["counts"]),
            image_size=d["image_size"],
            object_scale=tuple(d.get("object_scale", (0.28, 0.40))),
        )


def _p(shape, anchor, size, tex, cls, rot=0.0):
    return PartSpec(shape, anchor, size, tex, cls, rot)


# ---- Seen library (set S) ----

SEEN_TEMPLATES = [
    ObjectTemplate(1, "quadruped", (
        _p("rectangle", (0.0, 0.0), (0.55, 0.25), 0, 1),
        _p("ellipse", (0.8, -0.42), (0.18, 0.16), 1, 2),
        _p("rectangle", (-0.35, 0.62), (0.08, 0.22), 2, 3),
        _p("rectangle", (0.35, 0.62), (0.08, 0.22), 2, 3),
        _p("ellipse", (-0.82, -0.12), (0.14, 0.07), 3, 4, 20.0),
    )),
    ObjectTemplate(2, "bird", (
        _p("ellipse", (0.0, 0.05), (0.42, 0.26), 4, 1),
        _p("ellipse", (0.62, -0.38), (0.17, 0.15), 5, 2),
        _p("triangle", (-0.05, -0.55), (0.28, 0.2), 6, 5),
        _p("triangle", (-0.74, 0.05), (0.12, 0.18), 7, 4, 90.0),
        _p("rectangle", (0.1, 0.62), (0.06, 0.2), 2, 3),
    )),
    ObjectTemplate(3, "fish", (
        _p("ellipse", (0.0, 0.0), (0.5, 0.28), 8, 1),
        _p("triangle", (-0.78, 0.0), (0.16, 0.2), 9, 4, -90.0),
        _p("triangle", (0.0, -0.5), (0.18, 0.12), 6, 5),
        _p("triangle", (0.05, 0.5), (0.14, 0.1), 6, 5, 180.0),
    )),
    ObjectTemplate(4, "humanoid", (
        _p("rectangle", (0.0, 0.0), (0.25, 0.35), 10, 1),
        _p("ellipse", (0.0, -0.6), (0.16, 0.16), 1, 2),
        _p("rectangle", (-0.13, 0.68), (0.08, 0.22), 2, 3),
        _p("rectangle", (0.13, 0.68), (0.08, 0.22), 2, 3),
        _p("rectangle", (-0.42, -0.02), (0.07, 0.28), 11, 5),
        _p("rectangle", (0.42, -0.02), (0.07, 0.28), 11, 5),
    )),
]

# ---- Unseen library (set U): seen shapes recomposed + the novel ring ----

UNSEEN_TEMPLATES = [
    ObjectTemplate(11, "car", (
        _p("rectangle", (0.0, -0.1), (0.6, 0.2), 12, 1),
        _p("triangle", (0.0, -0.54), (0.32, 0.14), 13, 2),
        _p("ring", (-0.38, 0.35), (0.17, 0.17), 14, 6),
        _p("ring", (0.38, 0.35), (0.17, 0.17), 14, 6),
    )),
    ObjectTemplate(12, "snowman", (
        _p("ellipse", (0.0, 0.45), (0.35, 0.3), 15, 1),
        _p("ellipse", (0.0, -0.12), (0.24, 0.2), 16, 2),
        _p("triangle", (0.0, -0.55), (0.2, 0.14), 13, 4),
        _p("rectangle", (-0.52, 0.0), (0.05, 0.2), 11, 5, 30.0),
    )),
    ObjectTemplate(13, "bicycle", (
        _p("ring", (-0.5, 0.25), (0.3, 0.3), 14, 6),
        _p("ring", (0.5, 0.25), (0.3, 0.3), 14, 6),
        _p("rectangle", (0.0, -0.25), (0.3, 0.07), 12, 1),
        _p("triangle", (0.0, -0.55), (0.12, 0.1), 16, 2),
    )),
]


def default_manifest(seed: int = 0, n_train: int = 400, n_val: int = 60, n_test: int = 60,
                     image_size: int = IMAGE_SIZE) -> DatasetManifest:
    """Stock manifest with the seen/unseen template library."""
    return DatasetManifest(
        seed=seed,
        templates_seen=list(SEEN_TEMPLATES),
        templates_unseen=list(UNSEEN_TEMPLATES),
        counts={SPLIT_TRAIN: n_train, SPLIT_VAL: n_val, SPLIT_TEST: n_test},
        image_size=image_size,
    )
