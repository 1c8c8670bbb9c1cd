import json
import os

import numpy as np
import pytest

from config import SPLIT_TEST, RUN_MANIFEST
from cli.commands import parse_params, _managed
from cli.manifest import load_manifest
from cli.predictions import save_predictions, load_predictions
from cli.viz import render_panels, part_palette, save_panels
from core.errors import ConfigError, DatasetError
from main import main
from synthdata.dataset_io import load_dataset, DATASET_FILE
from synthdata.generator import split_samples
from tests.conftest import box, part, two_part_sample


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["gen", "--seed", "7", "--out", str(out), "--n-train", "2", "--n-unseen", "2"]) == 0
    return out


@pytest.fixture
def test_samples(data_dir):
    return split_samples(load_dataset(str(data_dir)), SPLIT_TEST)


# ---- gen ----

def test_gen_is_reproducible(data_dir, tmp_path):
    again = tmp_path / "again"
    assert main(["gen", "--seed", "7", "--out", str(again), "--n-train", "2", "--n-unseen", "2"]) == 0
    assert (again / DATASET_FILE).read_bytes() == (data_dir / DATASET_FILE).read_bytes()
    for name in sorted(os.listdir(data_dir / "images")):
        assert (again / "images" / name).read_bytes() == (data_dir / "images" / name).read_bytes()


def test_gen_writes_manifest(data_dir):
    m = load_manifest(str(data_dir))
    assert m.command == "gen" and m.status == "ok"
    assert m.outputs["n_samples"] == 6
    assert m.ended_at is not None


def test_gen_without_unseen_splits(tmp_path):
    assert main(["gen", "--seed", "1", "--out", str(tmp_path), "--n-train", "2", "--n-unseen", "0"]) == 0
    samples = load_dataset(str(tmp_path))
    assert len(samples) == 2


def test_missing_out_is_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["gen"])
    assert e.value.code == 2


def test_contradictory_flags_are_usage_errors(data_dir, tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["ops", "--data", str(data_dir), "--out", str(tmp_path), "--ss", "off", "--st", "off"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["train", "--data", str(data_dir), "--out", str(tmp_path), "--stage", "finetune"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["eval", "--data", str(data_dir), "--predictions", "p.json", "--params", "k=3"])
    assert e.value.code == 2


def test_missing_dataset_exits_one(tmp_path):
    assert main(["eval", "--data", str(tmp_path / "nope"), "--baseline", "slic"]) == 1


# ---- eval ----

def test_eval_perfect_predictions(data_dir, test_samples, tmp_path, capsys):
    preds = {s.sample_id: [p.agnostic() for p in s.gt_parts] for s in test_samples}
    path = str(tmp_path / "preds.json")
    save_predictions(preds, {s.sample_id: s.size for s in test_samples}, path, split=SPLIT_TEST)
    out_dir = tmp_path / "metrics"
    assert main(["eval", "--data", str(data_dir), "--split", SPLIT_TEST,
                 "--predictions", path, "--out", str(out_dir)]) == 0
    assert "100.00" in capsys.readouterr().out
    doc = json.loads((out_dir / "metrics.json").read_text())
    assert doc["ap"] == 1.0 and doc["ap50"] == 1.0 and doc["miou"] == 1.0


def test_eval_empty_predictions(data_dir, tmp_path, capsys):
    path = str(tmp_path / "empty.json")
    save_predictions({}, {}, path)
    assert main(["eval", "--data", str(data_dir), "--split", SPLIT_TEST, "--predictions", path]) == 0
    out = capsys.readouterr().out
    assert "0.00" in out and "100.00" not in out


def test_baseline_then_eval(data_dir, tmp_path, capsys):
    path = str(tmp_path / "fz.json")
    assert main(["baseline", "--method", "felzenszwalb", "--data", str(data_dir),
                 "--split", SPLIT_TEST, "--out", path, "--params", "k=50"]) == 0
    preds = load_predictions(path)
    assert preds and all(p.score == 1.0 for parts in preds.values() for p in parts)
    assert main(["eval", "--data", str(data_dir), "--split", SPLIT_TEST, "--predictions", path]) == 0
    assert "EVALUATION" in capsys.readouterr().out


def test_train_infer_viz(data_dir, tmp_path):
    run = tmp_path / "run"
    assert main(["train", "--data", str(data_dir), "--out", str(run), "--iterations", "0",
                 "--embed-dim", "16"]) == 0
    assert (run / "ckpt_base").exists()
    assert load_manifest(str(run)).outputs["checkpoint"] == "ckpt_base"

    preds_path = tmp_path / "preds.json"
    assert main(["infer", "--data", str(data_dir), "--split", SPLIT_TEST, "--checkpoint", str(run / "ckpt_base"),
                 "--post-aware", "on", "--score-threshold", "0.0", "--out", str(preds_path)]) == 0
    preds = load_predictions(str(preds_path))
    test = split_samples(load_dataset(str(data_dir)), SPLIT_TEST)
    assert sorted(preds) == sorted(s.sample_id for s in test)
    for s in test:
        assert all(not (p.mask & ~s.object_mask).any() for p in preds[s.sample_id])

    viz = tmp_path / "viz"
    assert main(["viz", "--data", str(data_dir), "--split", SPLIT_TEST, "--predictions", str(preds_path),
                 "--limit", "1", "--out", str(viz)]) == 0
    assert len(os.listdir(viz)) == 1


def test_parse_params():
    assert parse_params("k=100, sigma=0.5") == {"k": 100, "sigma": 0.5}
    assert parse_params(None) == {}
    with pytest.raises(ConfigError):
        parse_params("k")
    with pytest.raises(ConfigError):
        parse_params("k=big")


# ---- files ----

def test_predictions_round_trip(tmp_path):
    preds = {2: [part(box((8, 8), 0, 4, 0, 4), 0.7)], 0: []}
    path = str(tmp_path / "p.json")
    save_predictions(preds, {0: (8, 8), 2: (8, 8)}, path, split=SPLIT_TEST, source="unit")
    again = load_predictions(path)
    assert sorted(again) == [0, 2]
    assert again[0] == []
    assert again[2][0].score == 0.7
    assert np.array_equal(again[2][0].mask, box((8, 8), 0, 4, 0, 4))


def test_duplicate_prediction_ids(tmp_path):
    path = tmp_path / "dup.json"
    rec = {"image_id": 1, "size": [8, 8], "parts": []}
    path.write_text(json.dumps({"format_version": 1, "images": [rec, rec]}))
    with pytest.raises(DatasetError, match="duplicate"):
        load_predictions(str(path))


def test_prediction_mask_size_mismatch(tmp_path):
    path = tmp_path / "big.json"
    save_predictions({3: [part(box((8, 8), 0, 4, 0, 4))]}, {3: (8, 8)}, str(path))
    doc = json.loads(path.read_text())
    doc["images"][0]["size"] = [4, 4]
    path.write_text(json.dumps(doc))
    with pytest.raises(DatasetError, match="image 3"):
        load_predictions(str(path))


def test_managed_records_failure(tmp_path):
    class Args:
        seed = 3

    def body():
        raise ConfigError("boom")

    with pytest.raises(ConfigError):
        _managed("unit", Args(), str(tmp_path), {}, body)
    doc = json.loads((tmp_path / RUN_MANIFEST).read_text())
    assert doc["status"] == "failed" and "boom" in doc["error"]


# ---- viz ----

def test_panels_follow_available_data(tmp_path):
    s = two_part_sample()
    _, names = render_panels(s)
    assert names == ["input", "object mask", "gt parts"]
    img, names = render_panels(s, preds=list(s.gt_parts), cluster_labels=np.zeros(s.size, dtype=int),
                               pseudo=[])
    assert names == ["input", "object mask", "gt parts", "predictions", "clusters", "pseudo labels"]
    assert img.height > 32
    path = save_panels(s, str(tmp_path), preds=[])
    assert path.endswith("000000.png") and os.path.exists(path)


def test_palette_is_deterministic():
    assert np.array_equal(part_palette(5, seed=2), part_palette(5, seed=2))
    assert part_palette(5).shape == (5, 3)


def test_post_aware_takes_on_off(data_dir, tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["infer", "--data", str(data_dir), "--checkpoint", "c", "--out", str(tmp_path / "p.json"),
              "--post-aware"])
    assert e.value.code == 2
