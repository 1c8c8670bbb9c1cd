import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from core.errors import ConfigError, DimensionError
from objectaware.compose import compose_preaware, strip_preaware, postaware_filter, background_probe
from objectaware.imperfect import MaskQuality, simulate_imperfect, resolve_object_mask, mask_quality_report
from tests.conftest import box, part, two_part_sample

masks_12 = arrays(dtype=bool, shape=(12, 12))


# ---- pre-aware ----

def test_compose_appends_mask_channel():
    s = two_part_sample()
    x = compose_preaware(s.image, s.object_mask)
    assert x.shape == (32, 32, 4)
    assert set(np.unique(x[..., 3])) <= {0.0, 1.0}
    assert np.array_equal(x[..., 3] == 1.0, s.object_mask)
    assert np.array_equal(strip_preaware(x), s.image)


def test_compose_size_mismatch():
    with pytest.raises(DimensionError):
        compose_preaware(np.zeros((8, 8, 3)), np.zeros((8, 9), dtype=bool))


# ---- post-aware ----

def test_postaware_clips_and_drops():
    obj = box((10, 10), 0, 5, 0, 10)
    straddling = part(box((10, 10), 3, 8, 0, 4), score=0.9)
    outside = part(box((10, 10), 6, 10, 6, 10), score=0.8)
    inside = part(box((10, 10), 0, 2, 0, 2), score=0.7)
    out = postaware_filter([straddling, outside, inside], obj)
    assert len(out) == 2
    assert np.array_equal(out[0].mask, box((10, 10), 3, 5, 0, 4))
    assert out[0].score == 0.9
    assert out[1] is inside


def test_postaware_min_area():
    obj = box((10, 10), 0, 10, 0, 10)
    tiny = part(box((10, 10), 0, 1, 0, 3))
    assert postaware_filter([tiny], obj, min_area=4) == []
    assert len(postaware_filter([tiny], obj, min_area=3)) == 1


@given(st.lists(masks_12, max_size=5), masks_12)
def test_postaware_output_is_inside_and_idempotent(masks, obj):
    parts = [part(m) for m in masks]
    once = postaware_filter(parts, obj)
    for p in once:
        assert not (p.mask & ~obj).any()
        assert p.area >= 4
    twice = postaware_filter(once, obj)
    assert [p.mask.tolist() for p in twice] == [p.mask.tolist() for p in once]


def test_background_probe_splits_queries():
    obj = box((4, 4), 0, 2, 0, 4)
    logits = -np.ones((3, 4, 4))
    logits[0, 0, :] = 1.0        # inside
    logits[1, 3, :] = 1.0        # outside
    probe = background_probe([0.2, 0.9, 0.5], logits, obj)
    assert probe["n_inside"] == 1 and probe["n_outside"] == 1 and probe["n_empty"] == 1
    assert probe["mean_bg_inside"] == pytest.approx(0.2)
    assert probe["mean_bg_outside"] == pytest.approx(0.9)


# ---- simulated detector masks ----

def test_dilation_by_one_grows_square():
    m = box((20, 20), 5, 15, 5, 15)
    q = MaskQuality(radius_range=(1, 1), boundary_flip_rate=0.0, component_drop_rate=0.0)
    out, score = simulate_imperfect(m, q)
    assert np.array_equal(out, box((20, 20), 4, 16, 4, 16))
    assert score == pytest.approx(100 / 144)


def test_erosion_by_one_shrinks_square():
    m = box((20, 20), 5, 15, 5, 15)
    q = MaskQuality(radius_range=(-1, -1), boundary_flip_rate=0.0, component_drop_rate=0.0)
    out, _ = simulate_imperfect(m, q)
    assert np.array_equal(out, box((20, 20), 6, 14, 6, 14))


def test_drop_rate_one_empties_mask():
    q = MaskQuality(radius_range=(0, 0), boundary_flip_rate=0.0, component_drop_rate=1.0)
    out, score = simulate_imperfect(box((10, 10), 2, 6, 2, 6), q)
    assert not out.any()
    assert score == 0.0


@given(masks_12)
def test_zero_perturbation_is_identity(m):
    q = MaskQuality(radius_range=(0, 0), boundary_flip_rate=0.0, component_drop_rate=0.0)
    out, _ = simulate_imperfect(m, q)
    assert np.array_equal(out, m)


def test_flips_stay_near_the_boundary():
    m = box((30, 30), 10, 20, 10, 20)
    q = MaskQuality(radius_range=(0, 0), boundary_flip_rate=1.0, component_drop_rate=0.0)
    out, _ = simulate_imperfect(m, q)
    assert np.array_equal(out[12:18, 12:18], m[12:18, 12:18])
    assert not out[:8].any()


def test_quality_validation():
    with pytest.raises(ConfigError):
        MaskQuality(radius_range=(2, -2))
    with pytest.raises(ConfigError):
        MaskQuality(boundary_flip_rate=1.5)
    with pytest.raises(ConfigError):
        MaskQuality(kind="perfect")
    assert MaskQuality.perfect().is_zero
    q = MaskQuality(seed=3)
    assert MaskQuality.from_dict(q.to_dict()) == q


def test_resolve_object_mask_modes():
    s = two_part_sample(sample_id=5)
    assert resolve_object_mask(s, "none") is None
    assert resolve_object_mask(s, "perfect") is s.object_mask
    q = MaskQuality(seed=1)
    a = resolve_object_mask(s, "imperfect", q)
    b = resolve_object_mask(s, "imperfect", q)
    assert np.array_equal(a, b)
    with pytest.raises(ConfigError):
        resolve_object_mask(s, "oracle")


def test_mask_quality_report():
    samples = [two_part_sample(sample_id=i) for i in range(3)]
    rep = mask_quality_report(samples, MaskQuality.perfect())
    assert rep == {"n": 3, "mean_iou": 1.0, "min_iou": 1.0}
    assert mask_quality_report([], MaskQuality())["n"] == 0
