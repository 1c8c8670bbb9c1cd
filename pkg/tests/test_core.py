import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from core.errors import DimensionError, OPSError
from core.masks import iou, iou_matrix, connected_components, downsample_mask, upsample_nearest, union_masks
from core.types import PartInstance, AnnotatedSample, check_image, validate_sample
from core.errors import DatasetError
from utils.helpers import encode_bitmask, decode_bitmask, derive_seed, fmt_pct
from tests.conftest import box, two_part_sample

masks_8x8 = arrays(dtype=bool, shape=(8, 8))


# ---- iou ----

def test_iou_identity():
    m = box((6, 6), 1, 4, 1, 4)
    assert iou(m, m) == 1.0


def test_iou_disjoint():
    assert iou(box((6, 6), 0, 2, 0, 2), box((6, 6), 4, 6, 4, 6)) == 0.0


def test_iou_shifted_block_is_one_third():
    a = np.array([[1, 1, 0], [1, 1, 0]], dtype=bool)
    b = np.array([[0, 1, 1], [0, 1, 1]], dtype=bool)
    assert iou(a, b) == pytest.approx(2 / 6)


def test_iou_both_empty_is_zero():
    z = np.zeros((4, 4), dtype=bool)
    assert iou(z, z) == 0.0


def test_iou_size_mismatch():
    with pytest.raises(DimensionError):
        iou(np.zeros((4, 4)), np.zeros((4, 5)))
    assert issubclass(DimensionError, OPSError)


@given(masks_8x8, masks_8x8)
def test_iou_symmetric(a, b):
    assert iou(a, b) == iou(b, a)


@given(masks_8x8)
def test_iou_self_is_one_when_nonempty(a):
    assert iou(a, a) == (1.0 if a.any() else 0.0)


@given(st.lists(masks_8x8, min_size=1, max_size=4), st.lists(masks_8x8, min_size=1, max_size=4))
@settings(max_examples=50)
def test_iou_matrix_matches_pairwise(ps, gs):
    mat = iou_matrix(ps, gs)
    for i, p in enumerate(ps):
        for j, g in enumerate(gs):
            assert mat[i, j] == pytest.approx(iou(p, g))


# ---- connected components ----

def test_components_two_blobs():
    m = box((10, 10), 0, 3, 0, 3) | box((10, 10), 6, 9, 6, 9)
    comps = connected_components(m)
    assert len(comps) == 2
    assert np.array_equal(union_masks(comps, m.shape), m)


def test_components_empty():
    assert connected_components(np.zeros((5, 5), dtype=bool)) == []


def test_components_l_shape_is_one_under_4_connectivity():
    m = np.zeros((5, 5), dtype=bool)
    m[0:4, 0] = True
    m[3, 0:4] = True
    assert len(connected_components(m, connectivity=4)) == 1


def test_components_diagonal_depends_on_connectivity():
    m = np.eye(4, dtype=bool)
    assert len(connected_components(m, connectivity=8)) == 1
    assert len(connected_components(m, connectivity=4)) == 4


@given(masks_8x8, st.sampled_from([4, 8]))
def test_components_partition_input(m, conn):
    comps = connected_components(m, connectivity=conn)
    assert sum(int(c.sum()) for c in comps) == int(m.sum())
    assert np.array_equal(union_masks(comps, m.shape), m)
    for c in comps:
        assert len(connected_components(c, connectivity=conn)) == 1


# ---- resampling ----

def test_downsample_majority_blocks():
    m = np.zeros((8, 8), dtype=bool)
    m[:4, :4] = True
    small = downsample_mask(m, (2, 2))
    assert small.tolist() == [[True, False], [False, False]]


def test_upsample_nearest_repeats_cells():
    arr = np.array([[0, 1], [2, 3]])
    up = upsample_nearest(arr, (4, 4))
    assert up[0, 0] == 0 and up[0, 3] == 1 and up[3, 0] == 2 and up[3, 3] == 3


# ---- types ----

def test_check_image_rejects_bad_inputs():
    with pytest.raises(DimensionError):
        check_image(np.zeros((4, 4, 3)))
    with pytest.raises(DimensionError):
        check_image(np.zeros((8, 8, 2)))
    with pytest.raises(ValueError):
        check_image(np.full((8, 8, 3), 1.5))


def test_part_instance_is_immutable_and_scored():
    p = PartInstance(mask=box((4, 4), 0, 2, 0, 2), score=0.5, class_id=3)
    assert p.area == 4
    assert p.agnostic().class_id == 1
    with pytest.raises(ValueError):
        p.mask[0, 0] = False
    with pytest.raises(ValueError):
        PartInstance(mask=box((4, 4), 0, 1, 0, 1), score=1.5)


def test_validate_sample_rejects_part_outside_object():
    s = two_part_sample()
    validate_sample(s)
    bad = AnnotatedSample(sample_id=9, image=s.image, object_mask=s.gt_parts[0].mask,
                          gt_parts=s.gt_parts, split_tag=s.split_tag)
    with pytest.raises(DatasetError, match="sample 9"):
        validate_sample(bad)


# ---- helpers ----

@given(arrays(dtype=bool, shape=st.tuples(st.integers(1, 12), st.integers(1, 12))))
def test_bitmask_codec(m):
    assert np.array_equal(decode_bitmask(encode_bitmask(m), *m.shape), m)


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert derive_seed(1, 2, 3) != derive_seed(1, 2, 4)


def test_fmt_pct():
    assert fmt_pct(1.0) == "100.00"
    assert fmt_pct(0.0) == "0.00"
    assert fmt_pct(None) == "—"
