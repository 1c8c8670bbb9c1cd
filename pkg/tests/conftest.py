import numpy as np
import pytest

from config import SPLIT_TRAIN, SPLIT_VAL, SPLIT_TEST
from core.types import AnnotatedSample, PartInstance
from objectaware.imperfect import MaskQuality
from pipeline.config import OPSConfig, TrainConfig
from segmodel.model import ModelConfig
from selfsup.losses import SSConfig
from synthdata.generator import generate
from synthdata.templates import default_manifest


def box(shape, y0, y1, x0, x1) -> np.ndarray:
    m = np.zeros(shape, dtype=bool)
    m[y0:y1, x0:x1] = True
    return m


def part(mask, score=1.0, class_id=1) -> PartInstance:
    return PartInstance(mask=mask, score=score, class_id=class_id)


def two_part_sample(sample_id=0, split=SPLIT_TRAIN, size=32) -> AnnotatedSample:
    """Two side-by-side coloured boxes on a grey background."""
    image = np.full((size, size, 3), 0.5, dtype=np.float32)
    left = box((size, size), 8, 24, 6, 16)
    right = box((size, size), 8, 24, 16, 26)
    image[left] = (0.9, 0.1, 0.1)
    image[right] = (0.1, 0.1, 0.9)
    return AnnotatedSample(sample_id=sample_id, image=image, object_mask=left | right,
                           gt_parts=(part(left, class_id=1), part(right, class_id=2)),
                           split_tag=split, object_class_id=1 if split == SPLIT_TRAIN else 11)


@pytest.fixture
def tiny_samples():
    """A handful of generated 128px samples across all splits."""
    return generate(default_manifest(seed=3, n_train=4, n_val=2, n_test=2), workers=1)


@pytest.fixture
def split_sets(tiny_samples):
    train = [s for s in tiny_samples if s.split_tag == SPLIT_TRAIN]
    val = [s for s in tiny_samples if s.split_tag == SPLIT_VAL]
    test = [s for s in tiny_samples if s.split_tag == SPLIT_TEST]
    return train, val, test


def tiny_config(seed=0, object_mask="none", rounds=1, ss=True, st=True, base_iters=3,
                ft_iters=2, training_mode="class_agnostic", num_part_classes=1) -> OPSConfig:
    model = ModelConfig(channels_in=3 if object_mask == "none" else 4, embed_dim=16, num_queries=8,
                        widths=(8, 16), seed=seed, training_mode=training_mode,
                        num_part_classes=num_part_classes)
    return OPSConfig(
        model=model,
        base=TrainConfig.base(iterations=base_iters, batch_size=2, milestones=(), seed=seed, log_every=1),
        finetune=TrainConfig.finetune(iterations=ft_iters, batch_size=2, seed=seed, rounds=rounds,
                                      enable_ss=ss, enable_st=st, log_every=1),
        ss=SSConfig(K=3, kmeans_iters=3, kmeans_restarts=1, seed=seed),
        object_mask=object_mask,
        mask_quality=MaskQuality(seed=seed),
        seed=seed,
    )


@pytest.fixture
def tiny_cfg():
    return tiny_config()
