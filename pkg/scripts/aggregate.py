"""Objective-function aggregation into the ranking-score matrix.

Each main factor's raw sub-factor matrix D collapses to one score per
alternative, Objfn_i = sum_j D_ij * w_j. Passthrough factors (no sub-factors)
enter as their raw column times an optional positive scale. The resulting
alternatives x main-factors matrix, with labels, feeds the classifier.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from artifacts import csv_text, read_csv
from dataset import ID_COLUMN, LABEL_COLUMN, DecisionMatrix, LabeledDataset
from errors import ConfigError, DataValidationError
from grey import WeightVector

WEIGHT_COLUMNS = ["main_factor_id", "sub_factor_id", "correlation_degree", "weight"]


@dataclass(frozen=True)
class RankingScoreMatrix:
    values: np.ndarray
    main_factor_ids: tuple[str, ...]
    alternative_ids: tuple[str, ...]
    labels: tuple[str, ...] | None = None
    class_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "main_factor_ids", tuple(self.main_factor_ids))
        object.__setattr__(self, "alternative_ids", tuple(self.alternative_ids))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if not self.class_names:
                object.__setattr__(self, "class_names", tuple(dict.fromkeys(self.labels)))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if values.shape != (len(self.alternative_ids), len(self.main_factor_ids)):
            raise DataValidationError("SHAPE_MISMATCH", f"score matrix is {values.shape}, labels disagree", "ranking")
        if not np.all(np.isfinite(values)):
            r, c = np.argwhere(~np.isfinite(values))[0]
            raise DataValidationError("NON_FINITE", "score is not finite",
                                      f"row {r + 1}, column {self.main_factor_ids[c]}")
        if self.labels is not None and len(self.labels) != len(self.alternative_ids):
            raise DataValidationError("ROW_MISMATCH", "label count differs from row count", LABEL_COLUMN)

    @property
    def m(self) -> int:
        return len(self.alternative_ids)

    def class_rows(self, class_name: str) -> np.ndarray:
        if self.labels is None:
            raise DataValidationError("UNLABELED", "score matrix has no labels", LABEL_COLUMN)
        return np.array([i for i, lab in enumerate(self.labels) if lab == class_name], dtype=int)

    def take(self, rows) -> "RankingScoreMatrix":
        rows = np.asarray(rows, dtype=int)
        return RankingScoreMatrix(
            values=self.values[rows],
            main_factor_ids=self.main_factor_ids,
            alternative_ids=tuple(self.alternative_ids[i] for i in rows),
            labels=None if self.labels is None else tuple(self.labels[i] for i in rows),
            class_names=self.class_names,
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=list(self.main_factor_ids))
        frame.insert(0, ID_COLUMN, list(self.alternative_ids))
        if self.labels is not None:
            frame[LABEL_COLUMN] = list(self.labels)
        return frame


# ── Objective function ───────────────────────────────────────────────

def objective_scores(matrix: DecisionMatrix, weights: WeightVector) -> np.ndarray:
    """Weighted sum over sub-factors of the raw decision matrix."""
    if weights.main_factor_id != matrix.main_factor_id:
        raise DataValidationError(
            "FACTOR_MISMATCH", f"weights are for {weights.main_factor_id!r}", f"main factor {matrix.main_factor_id}"
        )
    if len(weights.weights) != matrix.values.shape[1]:
        raise DataValidationError(
            "DIMENSION_MISMATCH",
            f"{len(weights.weights)} weights for {matrix.values.shape[1]} sub-factors",
            f"main factor {matrix.main_factor_id}",
        )
    return matrix.values @ weights.weights


def build_ranking_matrix(dataset: LabeledDataset, weight_sets: dict[str, WeightVector],
                         passthrough_scale: dict[str, float] | None = None) -> RankingScoreMatrix:
    """Ranking scores, columns in hierarchy order, labels copied from the dataset."""
    scale = passthrough_scale or {}
    bad = {k: v for k, v in scale.items() if not v > 0}
    if bad:
        key = next(iter(bad))
        raise ConfigError("BAD_SCALE", f"scale must be > 0, got {bad[key]}", f"passthrough_scale.{key}")
    columns = []
    for mf in dataset.hierarchy.main_factors:
        if mf.passthrough:
            columns.append(dataset.passthrough_columns[mf.id] * float(scale.get(mf.id, 1.0)))
        elif mf.id not in weight_sets:
            raise DataValidationError("MISSING_WEIGHTS", "no weight set for main factor", f"main factor {mf.id}")
        else:
            columns.append(objective_scores(dataset.matrices[mf.id], weight_sets[mf.id]))
    return RankingScoreMatrix(
        values=np.column_stack(columns),
        main_factor_ids=dataset.hierarchy.main_factor_ids,
        alternative_ids=dataset.alternative_ids,
        labels=dataset.labels,
        class_names=dataset.class_names,
    )


def ranking_from_dataset(dataset: LabeledDataset) -> RankingScoreMatrix:
    """Dataset whose main factors are all passthrough, taken as ranking scores."""
    active = [mf.id for mf in dataset.hierarchy.main_factors if not mf.passthrough]
    if active:
        raise DataValidationError("NOT_SCORES", "dataset has sub-factor matrices; aggregate it first",
                                  f"main factor {active[0]}")
    return build_ranking_matrix(dataset, {})


# ── CSV codecs ───────────────────────────────────────────────────────

def weights_frame(weight_sets: dict[str, WeightVector]) -> pd.DataFrame:
    rows = [
        (w.main_factor_id, sf, float(c), float(v))
        for w in weight_sets.values()
        for sf, c, v in zip(w.sub_factor_ids, w.correlation_degrees, w.weights)
    ]
    return pd.DataFrame(rows, columns=WEIGHT_COLUMNS)


def read_weights(path: str | Path) -> dict[str, WeightVector]:
    frame = read_csv(path)
    missing = [c for c in WEIGHT_COLUMNS if c not in frame.columns]
    if missing:
        raise DataValidationError("MISSING_COLUMN", "weights file lacks a column", f"column {missing[0]}")
    return {
        str(mf): WeightVector(
            main_factor_id=str(mf),
            sub_factor_ids=tuple(str(s) for s in group["sub_factor_id"]),
            weights=group["weight"].to_numpy(dtype=float),
            correlation_degrees=group["correlation_degree"].to_numpy(dtype=float),
        )
        for mf, group in frame.groupby("main_factor_id", sort=False)
    }


def align_weights(weight_sets: dict[str, WeightVector], dataset: LabeledDataset) -> dict[str, WeightVector]:
    """Reorder each weight vector to the dataset's sub-factor order."""
    aligned = {}
    for mf_id, matrix in dataset.matrices.items():
        w = weight_sets.get(mf_id)
        if w is None:
            raise DataValidationError("MISSING_WEIGHTS", "no weight set for main factor", f"main factor {mf_id}")
        if set(w.sub_factor_ids) != set(matrix.sub_factor_ids):
            raise DataValidationError("DIMENSION_MISMATCH", "weights and matrix name different sub-factors",
                                      f"main factor {mf_id}")
        order = [w.sub_factor_ids.index(s) for s in matrix.sub_factor_ids]
        aligned[mf_id] = WeightVector(mf_id, matrix.sub_factor_ids, w.weights[order], w.correlation_degrees[order])
    return aligned


def ranking_csv(scores: RankingScoreMatrix) -> str:
    return csv_text(scores.to_frame())


def read_ranking(path: str | Path, *, labeled: bool = True,
                 feature_ids: tuple[str, ...] | None = None) -> RankingScoreMatrix:
    """Read a ranking-score CSV; ``feature_ids`` picks and orders the score columns."""
    frame = read_csv(path, dtype=str, keep_default_na=False)
    if frame.empty:
        raise DataValidationError("EMPTY_DATASET", "ranking file has no rows", str(path))
    if labeled and LABEL_COLUMN not in frame.columns:
        raise DataValidationError("MISSING_COLUMN", "required column is absent", f"column {LABEL_COLUMN}")
    skip = {ID_COLUMN, LABEL_COLUMN}
    columns = list(feature_ids) if feature_ids is not None else [c for c in frame.columns if c not in skip]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DataValidationError("MISSING_COLUMN", "required column is absent", f"column {missing[0]}")
    numeric = frame[columns].apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad = np.argwhere(~np.isfinite(numeric.to_numpy(dtype=float)))
    if len(bad):
        r, c = bad[0]
        raise DataValidationError("NON_NUMERIC", "score is not a number", f"row {r + 1}, column {columns[c]}")
    ids = (tuple(str(v).strip() for v in frame[ID_COLUMN]) if ID_COLUMN in frame.columns
           else tuple(f"row{k}" for k in range(1, len(frame) + 1)))
    labels = tuple(str(v).strip() for v in frame[LABEL_COLUMN]) if labeled else None
    return RankingScoreMatrix(numeric.to_numpy(dtype=float), tuple(columns), ids, labels)
