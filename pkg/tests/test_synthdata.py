import json
import os

import numpy as np
import pytest

from config import SPLIT_TRAIN, SPLIT_VAL, SPLIT_TEST, MIN_PART_AREA
from core.errors import ConfigError, DatasetError
from core.masks import union_masks
from core.types import validate_sample
from synthdata.dataset_io import save_dataset, load_dataset, DATASET_FILE
from synthdata.generator import generate, rasterize_part, split_samples, quantize
from synthdata.templates import default_manifest, DatasetManifest, SEEN_TEMPLATES, UNSEEN_TEMPLATES
from tests.conftest import two_part_sample


def test_generate_is_deterministic():
    m = default_manifest(seed=11, n_train=3, n_val=1, n_test=1)
    a, b = generate(m, workers=1), generate(m, workers=2)
    assert len(a) == len(b) == 5
    for x, y in zip(a, b):
        assert x.sample_id == y.sample_id
        assert np.array_equal(x.image, y.image)
        assert np.array_equal(x.object_mask, y.object_mask)
        assert [p.class_id for p in x.gt_parts] == [p.class_id for p in y.gt_parts]


def test_different_seeds_differ():
    a = generate(default_manifest(seed=1, n_train=1, n_val=0, n_test=0), workers=1)
    b = generate(default_manifest(seed=2, n_train=1, n_val=0, n_test=0), workers=1)
    assert not np.array_equal(a[0].image, b[0].image)


def test_parts_tile_the_object_mask(tiny_samples):
    for s in tiny_samples:
        validate_sample(s)
        assert np.array_equal(union_masks([p.mask for p in s.gt_parts], s.size), s.object_mask)
        masks = [p.mask for p in s.gt_parts]
        for i in range(len(masks)):
            assert masks[i].sum() >= MIN_PART_AREA
            for j in range(i + 1, len(masks)):
                assert not (masks[i] & masks[j]).any()


def test_seen_and_unseen_object_classes_are_disjoint(tiny_samples):
    seen = {s.object_class_id for s in split_samples(tiny_samples, SPLIT_TRAIN)}
    unseen = {s.object_class_id for s in tiny_samples if s.split_tag in (SPLIT_VAL, SPLIT_TEST)}
    assert seen and unseen
    assert not seen & unseen
    assert seen <= {t.class_id for t in SEEN_TEMPLATES}
    assert unseen <= {t.class_id for t in UNSEEN_TEMPLATES}


def test_manifest_rejects_overlapping_classes():
    m = DatasetManifest(seed=0, templates_seen=list(SEEN_TEMPLATES),
                        templates_unseen=[SEEN_TEMPLATES[0]])
    with pytest.raises(ConfigError, match="overlap"):
        m.validate()


def test_manifest_dict_round_trip():
    m = default_manifest(seed=5, n_train=2, n_val=1, n_test=1)
    again = DatasetManifest.from_dict(json.loads(json.dumps(m.to_dict())))
    assert again.to_dict() == m.to_dict()


def test_rasterize_ring_has_a_hole():
    m = rasterize_part("ring", (40, 40), (20.0, 20.0), (15.0, 15.0), 0.0)
    assert m.any()
    assert not m[20, 20]


def test_quantize_is_png_exact():
    img = np.random.default_rng(0).random((8, 8, 3))
    q = quantize(img)
    assert np.array_equal(quantize(q), q)


# ---- dataset files ----

def test_save_load_round_trip(tmp_path, tiny_samples):
    save_dataset(tiny_samples, str(tmp_path))
    loaded = load_dataset(str(tmp_path), strict=True)
    assert [s.sample_id for s in loaded] == [s.sample_id for s in tiny_samples]
    for a, b in zip(tiny_samples, loaded):
        assert a.split_tag == b.split_tag
        assert a.object_class_id == b.object_class_id
        assert np.allclose(a.image, b.image, atol=1e-6)
        assert np.array_equal(a.object_mask, b.object_mask)
        assert [p.class_id for p in a.gt_parts] == [p.class_id for p in b.gt_parts]
        for pa, pb in zip(a.gt_parts, b.gt_parts):
            assert np.array_equal(pa.mask, pb.mask)


def test_missing_image_file_is_reported(tmp_path):
    save_dataset([two_part_sample(sample_id=4)], str(tmp_path))
    os.remove(tmp_path / "images" / "000004.png")
    with pytest.raises(DatasetError, match="sample 4"):
        load_dataset(str(tmp_path))


def test_missing_dataset_file(tmp_path):
    with pytest.raises(DatasetError, match="not found"):
        load_dataset(str(tmp_path))


def _shrink_object_mask(path):
    """Rewrite the object mask so one column of the right part falls outside it."""
    from utils.helpers import decode_bitmask, encode_bitmask
    json_path = path / DATASET_FILE
    doc = json.loads(json_path.read_text())
    for ann in doc["annotations"]:
        if ann["is_object_mask"]:
            m = decode_bitmask(ann["bitmask_b64"], 32, 32)
            m[:, 25] = False
            ann["bitmask_b64"] = encode_bitmask(m)
    json_path.write_text(json.dumps(doc))


def test_lenient_load_clips_parts(tmp_path):
    save_dataset([two_part_sample()], str(tmp_path))
    _shrink_object_mask(tmp_path)
    (s,) = load_dataset(str(tmp_path), strict=False)
    right = s.gt_parts[1].mask
    assert not right[:, 25].any()
    assert right.sum() == 16 * 9


def test_strict_load_rejects_parts_outside_object(tmp_path):
    save_dataset([two_part_sample()], str(tmp_path))
    _shrink_object_mask(tmp_path)
    with pytest.raises(DatasetError, match="outside the object mask"):
        load_dataset(str(tmp_path), strict=True)


def test_mask_size_mismatch_names_the_sample(tmp_path):
    from utils.helpers import encode_bitmask
    save_dataset([two_part_sample(sample_id=9)], str(tmp_path))
    json_path = tmp_path / DATASET_FILE
    doc = json.loads(json_path.read_text())
    part_ann = next(a for a in doc["annotations"] if not a["is_object_mask"])
    part_ann["bitmask_b64"] = encode_bitmask(np.ones((40, 40), dtype=bool))
    json_path.write_text(json.dumps(doc))
    with pytest.raises(DatasetError, match="sample 9"):
        load_dataset(str(tmp_path))


def test_non_object_annotation_entry(tmp_path):
    save_dataset([two_part_sample()], str(tmp_path))
    json_path = tmp_path / DATASET_FILE
    doc = json.loads(json_path.read_text())
    doc["annotations"].append(7)
    json_path.write_text(json.dumps(doc))
    with pytest.raises(DatasetError, match=r"annotations\[\d+\]"):
        load_dataset(str(tmp_path))
