from __future__ import annotations

import json

import numpy as np
import pandas as pd
import pytest

from conftest import FIXTURES, ROOT, write_csv
from imts_cli import main

EXAMPLE_CONFIG = ROOT / "config.example.yaml"
TABLE6 = str(FIXTURES / "table6.csv")


SUB_FACTOR_HIERARCHY = {"main_factors": [
    {"id": "mf1", "name": "soil", "sub_factors": [{"id": "sf1"}, {"id": "sf2"}]},
    {"id": "mf2", "name": "water", "sub_factors": [{"id": "wf1"}, {"id": "wf2"}]},
    {"id": "mf3", "name": "season", "passthrough": True},
]}

SUB_FACTOR_ROWS = """
a1,1.0,2.1,0.3,5.2,0.11,a
a2,1.4,2.6,0.5,4.8,0.17,a
a3,0.9,1.8,0.2,5.9,0.13,a
a4,1.2,2.9,0.6,5.1,0.19,a
a5,1.7,2.2,0.4,4.5,0.12,a
a6,1.1,2.5,0.7,5.5,0.15,a
b1,8.2,9.1,3.3,1.2,0.91,b
b2,8.9,9.8,3.9,1.9,0.87,b
b3,7.6,8.7,3.1,1.4,0.95,b
b4,8.4,9.5,3.6,1.1,0.82,b
b5,9.1,8.9,3.4,1.7,0.89,b
b6,7.9,9.3,3.8,1.5,0.93,b
"""


def write_sub_factor_data(directory, id_header: str = "alternative_id"):
    """Two soil and two water sub-factors plus a passthrough season score, two crops."""
    hierarchy = directory / "h.json"
    hierarchy.write_text(json.dumps(SUB_FACTOR_HIERARCHY))
    data = write_csv(directory / "d.csv", f"{id_header},sf1,sf2,wf1,wf2,mf3,decision_class\n{SUB_FACTOR_ROWS.strip()}")
    return data, hierarchy


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for var in ("IMTS_OUTPUT_DIR", "IMTS_CONFIG_YAML"):
        monkeypatch.delenv(var, raising=False)


def snapshot(directory) -> dict[str, bytes]:
    return {str(p.relative_to(directory)): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


# ── pipeline ─────────────────────────────────────────────────────────

def test_pipeline_writes_every_artifact(tmp_path):
    out = tmp_path / "out"
    assert main(["pipeline", "--config", str(EXAMPLE_CONFIG), "--output-dir", str(out)]) == 0
    files = set(snapshot(out))
    assert {"weights.csv", "ranking.csv", "predictions.csv", "cv_predictions.csv", "report.json"} <= files
    assert {"models/01_paddy.json", "models/02_sugarcane.json", "models/03_groundnut.json"} <= files

    report = json.loads((out / "report.json").read_text())
    assert set(report) == {"resubstitution", "cross_validation"}
    assert report["resubstitution"]["accuracy"] == 100.0
    assert report["cross_validation"]["accuracy"] == 100.0
    assert report["cross_validation"]["folds"] == 10

    predictions = pd.read_csv(out / "predictions.csv")
    assert list(predictions.columns) == ["alternative_id", "md_paddy", "md_sugarcane", "md_groundnut",
                                         "predicted", "tie"]
    assert predictions.loc[0, "md_paddy"] == pytest.approx(0.730297)


def test_pipeline_is_byte_identical_across_runs(tmp_path):
    runs = []
    for name in ("a", "b"):
        assert main(["pipeline", "--config", str(EXAMPLE_CONFIG), "--output-dir", str(tmp_path / name),
                     "--folds", "5", "--format", "csv"]) == 0
        runs.append(snapshot(tmp_path / name))
    assert runs[0] == runs[1]
    assert "report.csv" in runs[0]


def test_pipeline_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("IMTS_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["pipeline", "--config", str(EXAMPLE_CONFIG), "--format", "table"]) == 0
    assert (tmp_path / "env" / "report.txt").read_text().startswith("resubstitution (IMTS)")


def test_missing_dataset_fails_without_writing(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["pipeline", "--config", str(EXAMPLE_CONFIG), "--output-dir", str(out),
                 "--data", str(tmp_path / "missing.csv")])
    assert code == 5
    assert not out.exists()
    assert "error [load] FILE_NOT_FOUND" in capsys.readouterr().err


def test_bad_fold_count_is_a_config_error(tmp_path, capsys):
    code = main(["pipeline", "--config", str(EXAMPLE_CONFIG), "--output-dir", str(tmp_path), "--folds", "1"])
    assert code == 2
    assert "BAD_FOLDS" in capsys.readouterr().err


def test_strict_zero_std_fails_cross_validation(tmp_path, capsys):
    code = main(["pipeline", "--config", str(EXAMPLE_CONFIG), "--output-dir", str(tmp_path / "out"),
                 "--zero-std", "error", "--folds", "5"])
    assert code == 4
    err = capsys.readouterr().err
    assert "error [evaluate] ZERO_STD at fold" in err
    assert not (tmp_path / "out").exists()


def test_pipeline_on_sub_factor_data(tmp_path):
    write_sub_factor_data(tmp_path, id_header="site")
    config = tmp_path / "config.yaml"
    config.write_text("dataset: d.csv\nhierarchy: h.json\nzero_std: drop\nfolds: 3\nformat: csv\n")
    out = tmp_path / "out"
    assert main(["pipeline", "--config", str(config), "--output-dir", str(out), "--id-column", "site"]) == 0

    weights = pd.read_csv(out / "weights.csv")
    assert weights["sub_factor_id"].tolist() == ["sf1", "sf2", "wf1", "wf2"]
    assert weights.groupby("main_factor_id")["weight"].sum().tolist() == pytest.approx([1.0, 1.0], abs=1e-5)
    ranking = pd.read_csv(out / "ranking.csv")
    assert list(ranking.columns) == ["alternative_id", "mf1", "mf2", "mf3", "decision_class"]
    assert ranking["alternative_id"].tolist()[:2] == ["a1", "a2"]
    predictions = pd.read_csv(out / "predictions.csv")
    assert predictions["alternative_id"].tolist() == ranking["alternative_id"].tolist()
    assert {"models/01_a.json", "models/02_b.json", "report.csv", "cv_predictions.csv"} <= set(snapshot(out))


def test_pipeline_id_column_is_configurable(tmp_path, capsys):
    write_sub_factor_data(tmp_path, id_header="site")
    config = tmp_path / "config.yaml"
    config.write_text("dataset: d.csv\nhierarchy: h.json\nzero_std: drop\nfolds: 3\n")
    assert main(["pipeline", "--config", str(config), "--output-dir", str(tmp_path / "out")]) == 3
    assert "UNKNOWN_COLUMN at column site" in capsys.readouterr().err

    config.write_text("dataset: d.csv\nhierarchy: h.json\nzero_std: drop\nfolds: 3\nid_column: site\n")
    assert main(["pipeline", "--config", str(config), "--output-dir", str(tmp_path / "out")]) == 0


def test_unknown_flag_is_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["pipeline", "--no-such-flag"])
    assert exc.value.code == 2


# ── staged commands ──────────────────────────────────────────────────

def test_weights_with_intermediates(tmp_path):
    code = main(["weights", "--data", str(FIXTURES / "table1.csv"), "--hierarchy",
                 str(FIXTURES / "hierarchy_soil.json"), "--no-labels", "--dump-intermediates",
                 "--output-dir", str(tmp_path)])
    assert code == 0
    weights = pd.read_csv(tmp_path / "weights.csv")
    assert list(weights.columns) == ["main_factor_id", "sub_factor_id", "correlation_degree", "weight"]
    assert len(weights) == 11
    assert weights["weight"].sum() == pytest.approx(1.0, abs=1e-5)
    for name in ("comparability", "delta", "coefficient"):
        assert (tmp_path / "grey" / f"mf1_{name}.csv").exists()


def test_weights_then_aggregate_on_sub_factor_data(tmp_path):
    data, hierarchy = write_sub_factor_data(tmp_path)
    out = tmp_path / "out"
    common = ["--data", str(data), "--hierarchy", str(hierarchy), "--output-dir", str(out)]
    assert main(["weights", *common]) == 0
    assert main(["aggregate", *common, "--weights", str(out / "weights.csv")]) == 0

    raw = pd.read_csv(data)
    weights = pd.read_csv(out / "weights.csv")
    ranking = pd.read_csv(out / "ranking.csv")
    assert ranking["alternative_id"].tolist() == raw["alternative_id"].tolist()
    for mf in ("mf1", "mf2"):
        w = weights[weights["main_factor_id"] == mf]
        expected = raw[w["sub_factor_id"].tolist()].to_numpy() @ w["weight"].to_numpy()
        np.testing.assert_allclose(ranking[mf], expected, atol=1e-6)
    np.testing.assert_allclose(ranking["mf3"], raw["mf3"], atol=1e-6)
    assert ranking["decision_class"].tolist() == raw["decision_class"].tolist()


def test_ragged_csv_is_a_data_error(tmp_path, capsys):
    data, hierarchy = write_sub_factor_data(tmp_path)
    data.write_text(data.read_text() + "c1,1,2,3,4,0.5,c,extra\n")
    code = main(["weights", "--data", str(data), "--hierarchy", str(hierarchy),
                 "--output-dir", str(tmp_path / "out")])
    assert code == 3
    assert "error [weights] MALFORMED_CSV" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_train_classify_evaluate_chain(tmp_path, capsys):
    assert main(["train", "--scores", TABLE6, "--zero-std", "drop", "--output-dir", str(tmp_path)]) == 0
    assert len(list((tmp_path / "models").glob("*.json"))) == 3

    assert main(["classify", "--models", str(tmp_path / "models"), "--scores", TABLE6,
                 "--output-dir", str(tmp_path)]) == 0
    predicted = pd.read_csv(tmp_path / "predictions.csv")["predicted"].tolist()
    assert predicted == pd.read_csv(FIXTURES / "table6.csv", comment="#")["decision_class"].tolist()

    svm = write_csv(tmp_path / "svm.csv", "alternative_id,predicted\np1,paddy\ns1,paddy\ng1,groundnut")
    capsys.readouterr()
    assert main(["evaluate", "--scores", TABLE6, "--folds", "5", "--zero-std", "drop", "--resubstitution",
                 "--import", str(svm), "--name", "SVM", "--format", "table", "--output-dir", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("cross_validation (IMTS, 5 folds, seed 42)")
    comparison = pd.read_csv(tmp_path / "comparison.csv")
    assert comparison["classifier"].tolist() == ["IMTS", "SVM"]
    assert comparison["accuracy"].tolist() == pytest.approx([100.0, 200 / 3], abs=1e-6)
    assert (tmp_path / "report.txt").exists()
    assert len(pd.read_csv(tmp_path / "cv_predictions.csv")) == 15


def test_evaluate_accepts_a_negative_seed(tmp_path):
    assert main(["evaluate", "--scores", TABLE6, "--seed", "-1", "--zero-std", "drop", "--folds", "5",
                 "--output-dir", str(tmp_path)]) == 0
    assert len(pd.read_csv(tmp_path / "cv_predictions.csv")) == 15


def test_import_names_must_pair_up(tmp_path):
    code = main(["evaluate", "--scores", TABLE6, "--zero-std", "drop", "--folds", "5",
                 "--import", "a.csv", "--import", "b.csv", "--name", "A", "--output-dir", str(tmp_path)])
    assert code == 2


# ── reproduce ────────────────────────────────────────────────────────

@pytest.mark.parametrize("table", ["t4", "t5", "t7", "t9_imts", "all"])
def test_reproduce_passes(table, capsys):
    assert main(["reproduce", table]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out
