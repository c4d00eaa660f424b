from __future__ import annotations

import json

import numpy as np
import pytest

from aggregate import (
    RankingScoreMatrix, align_weights, build_ranking_matrix, objective_scores, ranking_csv, ranking_from_dataset,
    read_ranking, read_weights, weights_frame,
)
from artifacts import csv_text
from conftest import CLASSES, write_csv
from dataset import DecisionMatrix, load_dataset
from errors import ConfigError, DataValidationError
from grey import WeightVector, dataset_weights


def vector(w, mf="mf1") -> WeightVector:
    w = np.asarray(w, dtype=float)
    return WeightVector(mf, tuple(f"sf{j + 1}" for j in range(len(w))), w, w)


def decision(values, mf="mf1") -> DecisionMatrix:
    values = np.asarray(values, dtype=float)
    return DecisionMatrix(mf, tuple(f"sf{j + 1}" for j in range(values.shape[1])), values,
                          tuple(f"a{i + 1}" for i in range(values.shape[0])))


@pytest.fixture
def raw_dataset(tmp_path):
    """Two main factors with sub-factors plus a passthrough season column."""
    h = tmp_path / "h.json"
    h.write_text(json.dumps({"main_factors": [
        {"id": "mf1", "name": "soil", "sub_factors": [{"id": "sf1"}, {"id": "sf2"}]},
        {"id": "mf2", "name": "water", "sub_factors": [{"id": "wf1"}, {"id": "wf2"}, {"id": "wf3"}]},
        {"id": "mf3", "name": "season", "passthrough": True},
    ]}))
    data = write_csv(tmp_path / "d.csv", """
alternative_id,sf1,sf2,wf1,wf2,wf3,mf3,decision_class
x1,1,4,0.2,0.5,3,0.9,a
x2,2,3,0.4,0.1,2,0.9,a
x3,3,2,0.6,0.3,1,0.3,b
x4,4,1,0.8,0.7,5,0.3,b
""")
    return load_dataset(data, h)


def test_objective_scores_worked_examples():
    np.testing.assert_allclose(objective_scores(decision([[1, 1], [1, 1]]), vector([0.3, 0.7])), [1.0, 1.0])
    np.testing.assert_allclose(objective_scores(decision([[1, 2], [3, 4]]), vector([0.25, 0.75])), [1.75, 3.75])
    d = decision([[1, 2, 3], [4, 5, 6]])
    np.testing.assert_array_equal(objective_scores(d, vector([0, 1, 0])), [2, 5])


def test_objective_scores_rejects_mismatches():
    with pytest.raises(DataValidationError) as exc:
        objective_scores(decision([[1, 2]]), vector([1.0]))
    assert exc.value.code == "DIMENSION_MISMATCH"
    with pytest.raises(DataValidationError) as exc:
        objective_scores(decision([[1, 2]]), vector([0.5, 0.5], mf="mf2"))
    assert exc.value.code == "FACTOR_MISMATCH"


def test_objective_scores_properties(rng):
    for _ in range(20):
        d = rng.uniform(-5, 5, (6, 4))
        w = rng.dirichlet(np.ones(4))
        scores = objective_scores(decision(d), vector(w))
        alpha = rng.uniform(-3, 3)
        np.testing.assert_allclose(objective_scores(decision(alpha * d), vector(w)), alpha * scores, atol=1e-12)
        assert np.all(scores >= d.min(axis=1) - 1e-12) and np.all(scores <= d.max(axis=1) + 1e-12)
        rows = rng.permutation(6)
        np.testing.assert_allclose(objective_scores(decision(d[rows]), vector(w)), scores[rows], atol=1e-12)


def test_table6_loads_directly_as_ranking_scores(table6):
    assert table6.values.shape == (15, 6)
    assert table6.main_factor_ids == tuple(f"mf{j}" for j in range(1, 7))
    np.testing.assert_array_equal(table6.values[0], [0.5901, 0.716, 0.9, 1.4668, 0.5725, 0.8268])
    assert table6.labels[0] == "paddy"
    assert table6.class_names == CLASSES


def test_identity_through_score_hierarchy(table6, fixtures):
    np.testing.assert_array_equal(read_ranking(fixtures / "table6.csv").values, table6.values)


def test_build_ranking_matrix_mixes_weighted_and_passthrough(raw_dataset):
    weight_sets = {k: a.weights for k, a in dataset_weights(raw_dataset).items()}
    scores = build_ranking_matrix(raw_dataset, weight_sets, {"mf3": 2.0})
    assert scores.main_factor_ids == ("mf1", "mf2", "mf3")
    np.testing.assert_allclose(scores.values[:, 0], raw_dataset.matrices["mf1"].values @ weight_sets["mf1"].weights)
    np.testing.assert_allclose(scores.values[:, 2], [1.8, 1.8, 0.6, 0.6])
    assert scores.labels == ("a", "a", "b", "b")


def test_build_ranking_matrix_errors(raw_dataset):
    weight_sets = {k: a.weights for k, a in dataset_weights(raw_dataset).items()}
    with pytest.raises(DataValidationError) as exc:
        build_ranking_matrix(raw_dataset, {"mf1": weight_sets["mf1"]})
    assert (exc.value.code, exc.value.location) == ("MISSING_WEIGHTS", "main factor mf2")
    with pytest.raises(ConfigError) as exc:
        build_ranking_matrix(raw_dataset, weight_sets, {"mf3": 0.0})
    assert exc.value.code == "BAD_SCALE"


def test_single_factor_single_weight_is_the_raw_column(tmp_path):
    h = tmp_path / "h.json"
    h.write_text(json.dumps({"main_factors": [{"id": "mf1", "sub_factors": [{"id": "sf1"}]}]}))
    ds = load_dataset(write_csv(tmp_path / "d.csv", "sf1,decision_class\n0,a\n0,a\n0,b\n0,b"), h)
    scores = build_ranking_matrix(ds, {"mf1": vector([1.0])})
    np.testing.assert_array_equal(scores.values[:, 0], [0, 0, 0, 0])


def test_label_alignment_survives_row_shuffle(raw_dataset, rng):
    weight_sets = {k: a.weights for k, a in dataset_weights(raw_dataset).items()}
    base = build_ranking_matrix(raw_dataset, weight_sets)
    for _ in range(10):
        rows = rng.permutation(raw_dataset.m)
        shuffled = build_ranking_matrix(raw_dataset.take(rows), weight_sets)
        np.testing.assert_array_equal(shuffled.values, base.values[rows])
        assert shuffled.labels == tuple(base.labels[i] for i in rows)


def test_ranking_from_dataset_needs_passthrough_only(raw_dataset):
    with pytest.raises(DataValidationError) as exc:
        ranking_from_dataset(raw_dataset)
    assert exc.value.code == "NOT_SCORES"


def test_weights_csv_reads_back_in_dataset_order(tmp_path, raw_dataset):
    weight_sets = {k: a.weights for k, a in dataset_weights(raw_dataset).items()}
    frame = weights_frame(weight_sets)
    assert list(frame.columns) == ["main_factor_id", "sub_factor_id", "correlation_degree", "weight"]
    shuffled = frame.iloc[::-1]
    path = tmp_path / "weights.csv"
    path.write_text(shuffled.to_csv(index=False))
    aligned = align_weights(read_weights(path), raw_dataset)
    for mf, w in weight_sets.items():
        assert aligned[mf].sub_factor_ids == w.sub_factor_ids
        np.testing.assert_allclose(aligned[mf].weights, w.weights)


def test_read_ranking_reports_bad_cells(tmp_path):
    path = write_csv(tmp_path / "r.csv", "alternative_id,mf1,mf2,decision_class\np1,1,2,a\np2,x,3,a")
    with pytest.raises(DataValidationError) as exc:
        read_ranking(path)
    assert (exc.value.code, exc.value.location) == ("NON_NUMERIC", "row 2, column mf1")


def test_ranking_csv_writes_six_decimals(table6):
    text = ranking_csv(table6)
    assert text.splitlines()[0] == "alternative_id,mf1,mf2,mf3,mf4,mf5,mf6,decision_class"
    assert text.splitlines()[1] == "p1,0.590100,0.716000,0.900000,1.466800,0.572500,0.826800,paddy"


def test_score_matrix_rejects_non_finite():
    with pytest.raises(DataValidationError) as exc:
        RankingScoreMatrix(np.array([[1.0], [np.nan]]), ("mf1",), ("a", "b"))
    assert exc.value.code == "NON_FINITE"
    assert csv_text(RankingScoreMatrix(np.ones((2, 1)), ("mf1",), ("a", "b")).to_frame()).startswith("alternative_id")
