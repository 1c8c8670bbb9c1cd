import json

import pytest

from experiments.report import summarize, check_claims, build_experiments_report, write_experiments
from experiments.run import run_experiments, main as experiments_main
from main import main


def rows_for(experiment, aps, seeds=(0, 1)):
    rows = []
    for variant, ap in aps.items():
        for i, seed in enumerate(seeds):
            # +-0.01 around the mean
            v = ap + (0.01 if i % 2 else -0.01)
            rows.append({"experiment": experiment, "variant": variant, "seed": seed,
                         "ap": v, "ap50": v, "miou": v, "fwiou": v, "macc": v})
    return rows


def object_rows(none=0.20, imperfect=0.30, perfect=0.40, post_drop=0.0):
    aps = {"none": none, "imperfect": imperfect, "perfect": perfect}
    aps.update({f"{k}+post": v - post_drop for k, v in list(aps.items())})
    return rows_for("object_awareness", aps)


def by_claim(checks):
    return {c["claim"]: c["passed"] for c in checks}


def test_summarize_mean_std_count():
    s = summarize(rows_for("agnostic_vs_aware", {"class_agnostic": 0.5, "class_aware": 0.4}))
    row = s[s["variant"] == "class_agnostic"].iloc[0]
    assert row["ap_mean"] == pytest.approx(0.5)
    assert row["ap_std"] == pytest.approx(0.01)
    assert row["n_seeds"] == 2
    assert list(s["variant"]) == ["class_agnostic", "class_aware"]


def test_summarize_empty():
    assert summarize([]).empty
    assert check_claims(summarize([])) == []


def test_object_awareness_claims():
    checks = check_claims(summarize(object_rows()))
    assert len(checks) == 2 and all(c["passed"] for c in checks)

    checks = by_claim(check_claims(summarize(object_rows(imperfect=0.205, post_drop=0.01))))
    assert list(checks.values()) == [False, False]


def test_agnostic_claim_allows_small_slack():
    rows = rows_for("agnostic_vs_aware", {"class_agnostic": 0.398, "class_aware": 0.40})
    assert [c["passed"] for c in check_claims(summarize(rows))] == [True]
    rows = rows_for("agnostic_vs_aware", {"class_agnostic": 0.35, "class_aware": 0.40})
    assert [c["passed"] for c in check_claims(summarize(rows))] == [False]


def test_finetune_claims():
    rows = rows_for("finetune_components", {"base": 0.30, "ss": 0.31, "st": 0.299, "ss+st": 0.33})
    assert [c["passed"] for c in check_claims(summarize(rows))] == [True, True]
    rows = rows_for("finetune_components", {"base": 0.30, "ss": 0.25, "st": 0.31, "ss+st": 0.30})
    assert [c["passed"] for c in check_claims(summarize(rows))] == [False, False]


def test_report_marks_failures():
    rows = object_rows(imperfect=0.205)
    summary = summarize(rows)
    text = build_experiments_report(summary, check_claims(summary), [0, 1])
    assert text.startswith("=" * 70)
    assert "--- object_awareness ---" in text
    assert "[FAIL]" in text and "[PASS]" in text


def test_write_experiments(tmp_path):
    rows = object_rows() + rows_for("agnostic_vs_aware", {"class_agnostic": 0.5, "class_aware": 0.4})
    report_path, results_path = write_experiments(rows, [0, 1], str(tmp_path))
    assert "DIRECTIONAL CHECKS" in open(report_path, encoding="utf-8").read()
    doc = json.loads(open(results_path, encoding="utf-8").read())
    assert doc["seeds"] == [0, 1]
    assert len(doc["rows"]) == len(rows)
    assert len(doc["checks"]) == 3


def test_unknown_experiment():
    with pytest.raises(ValueError, match="unknown experiments"):
        run_experiments((0,), "unused", which=["nope"])


@pytest.mark.slow
def test_quick_agnostic_run(tmp_path):
    report_path, results_path = run_experiments((0,), str(tmp_path), which=["agnostic_vs_aware"], quick=True)
    doc = json.loads(open(results_path, encoding="utf-8").read())
    assert {r["variant"] for r in doc["rows"]} == {"class_agnostic", "class_aware"}
    assert all(0.0 <= r["ap"] <= 1.0 for r in doc["rows"])


def test_bad_seeds_are_usage_errors():
    for entry in (experiments_main, lambda argv: main(["experiments"] + argv)):
        with pytest.raises(SystemExit) as e:
            entry(["--seeds", "0,x"])
        assert e.value.code == 2


def test_runner_rejects_unknown_only(tmp_path):
    with pytest.raises(ValueError, match="unknown experiments"):
        experiments_main(["--seeds", "0", "--only", "nope", "--out", str(tmp_path)])


def comparison_rows(ops=0.6, slic=0.4, fz=0.5, ncut=0.3, modes=("perfect", "imperfect")):
    aps = {}
    for mode in modes:
        aps.update({f"ops/{mode}": ops, f"slic/{mode}": slic, f"felzenszwalb/{mode}": fz, f"ncut/{mode}": ncut})
    return rows_for("baselines_comparison", aps)


def test_baselines_comparison_claims_per_mask_mode():
    checks = check_claims(summarize(comparison_rows()))
    assert [c["claim"] for c in checks] == ["OPS mIoU beats every baseline with imperfect object masks",
                                            "OPS mIoU beats every baseline with perfect object masks"]
    assert all(c["passed"] for c in checks)
    assert "felzenszwalb" in checks[0]["detail"]

    checks = check_claims(summarize(comparison_rows(fz=0.65, modes=("perfect",))))
    assert [c["passed"] for c in checks] == [False]


def test_report_lists_semantic_columns():
    summary = summarize(comparison_rows())
    text = build_experiments_report(summary, check_claims(summary), [0, 1])
    assert "--- baselines_comparison ---" in text
    assert "fwIoU" in text and "mACC" in text


@pytest.mark.slow
def test_quick_baselines_comparison(tmp_path):
    _, results_path = run_experiments((0,), str(tmp_path), which=["baselines_comparison"], quick=True)
    doc = json.loads(open(results_path, encoding="utf-8").read())
    variants = {r["variant"] for r in doc["rows"]}
    assert variants == {f"{m}/{mode}" for m in ("ops", "slic", "felzenszwalb", "ncut")
                        for mode in ("perfect", "imperfect")}
    assert all(0.0 <= r[k] <= 1.0 for r in doc["rows"] for k in ("miou", "fwiou", "macc"))
    assert len(doc["checks"]) == 2
