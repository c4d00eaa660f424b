"""Labeled agriculture datasets and the factor hierarchy over their columns.

A hierarchy groups sub-factor columns under main factors (soil, water,
season, ...). A main factor without sub-factors is a passthrough: its single
column is carried into the ranking matrix as-is. Datasets are CSV files with
an optional ``alternative_id`` column, one column per sub-factor/passthrough
factor and a ``decision_class`` label column.

Usage:
    python scripts/dataset.py data/fixtures/table6.csv data/fixtures/hierarchy_scores.json
"""
from __future__ import annotations

import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from artifacts import atomic_write, read_csv, read_text
from errors import DataValidationError

log = logging.getLogger(__name__)

LABEL_COLUMN = "decision_class"
ID_COLUMN = "alternative_id"

ERROR = "error"
WARNING = "warning"


# ── Factor hierarchy ─────────────────────────────────────────────────

@dataclass(frozen=True)
class SubFactor:
    id: str
    name: str


@dataclass(frozen=True)
class MainFactor:
    id: str
    name: str
    sub_factors: tuple[SubFactor, ...] = ()
    passthrough: bool = False

    @property
    def sub_factor_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.sub_factors)

    @property
    def columns(self) -> tuple[str, ...]:
        """Data columns bound to this factor, in hierarchy order."""
        return (self.id,) if self.passthrough else self.sub_factor_ids


@dataclass(frozen=True)
class FactorHierarchy:
    main_factors: tuple[MainFactor, ...]

    @property
    def main_factor_ids(self) -> tuple[str, ...]:
        return tuple(mf.id for mf in self.main_factors)

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(c for mf in self.main_factors for c in mf.columns)

    def get(self, main_factor_id: str) -> MainFactor:
        found = next((mf for mf in self.main_factors if mf.id == main_factor_id), None)
        if found is None:
            raise DataValidationError(
                "UNKNOWN_MAIN_FACTOR", f"no main factor {main_factor_id!r} in hierarchy",
                f"main factor {main_factor_id}",
            )
        return found

    @classmethod
    def from_dict(cls, doc: dict) -> "FactorHierarchy":
        try:
            factors = tuple(_main_factor(entry) for entry in doc["main_factors"])
        except (KeyError, TypeError) as e:
            raise DataValidationError("BAD_HIERARCHY", f"malformed hierarchy document ({e})") from e
        return cls(main_factors=factors)

    def to_dict(self) -> dict:
        return {"main_factors": [
            {"id": mf.id, "name": mf.name, "passthrough": mf.passthrough,
             "sub_factors": [{"id": s.id, "name": s.name} for s in mf.sub_factors]}
            for mf in self.main_factors
        ]}


def _main_factor(entry: dict) -> MainFactor:
    subs = tuple(SubFactor(id=str(s["id"]), name=str(s.get("name", s["id"]))) for s in entry.get("sub_factors", []))
    return MainFactor(
        id=str(entry["id"]),
        name=str(entry.get("name", entry["id"])),
        sub_factors=subs,
        passthrough=bool(entry.get("passthrough", not subs)),
    )


def load_hierarchy(path: str | Path) -> FactorHierarchy:
    try:
        doc = json.loads(read_text(path))
    except json.JSONDecodeError as e:
        raise DataValidationError("BAD_HIERARCHY", f"invalid JSON ({e.msg})", f"{path}:{e.lineno}") from e
    hierarchy = FactorHierarchy.from_dict(doc)
    problems = [v for v in check_hierarchy(hierarchy) if v.severity == ERROR]
    if problems:
        raise problems[0].to_error()
    return hierarchy


# ── Datasets ─────────────────────────────────────────────────────────

def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DecisionMatrix:
    """Alternatives x sub-factors matrix for one main factor."""
    main_factor_id: str
    sub_factor_ids: tuple[str, ...]
    values: np.ndarray
    alternative_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        values = _frozen(np.atleast_2d(self.values))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sub_factor_ids", tuple(self.sub_factor_ids))
        object.__setattr__(self, "alternative_ids", tuple(self.alternative_ids))
        if values.shape != (len(self.alternative_ids), len(self.sub_factor_ids)):
            raise DataValidationError(
                "SHAPE_MISMATCH",
                f"values are {values.shape[0]}x{values.shape[1]} but labels give "
                f"{len(self.alternative_ids)}x{len(self.sub_factor_ids)}",
                f"main factor {self.main_factor_id}",
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def column(self, sub_factor_id: str) -> np.ndarray:
        return self.values[:, self.sub_factor_ids.index(sub_factor_id)]


@dataclass(frozen=True)
class LabeledDataset:
    hierarchy: FactorHierarchy
    matrices: dict[str, DecisionMatrix]
    passthrough_columns: dict[str, np.ndarray]
    alternative_ids: tuple[str, ...]
    labels: tuple[str, ...] | None = None
    class_names: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "passthrough_columns",
                           {k: _frozen(v) for k, v in self.passthrough_columns.items()})
        object.__setattr__(self, "alternative_ids", tuple(self.alternative_ids))
        if self.labels is not None:
            labels = tuple(self.labels)
            object.__setattr__(self, "labels", labels)
            if not self.class_names:
                object.__setattr__(self, "class_names", tuple(dict.fromkeys(labels)))
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def m(self) -> int:
        return len(self.alternative_ids)

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None

    def column(self, column_id: str) -> np.ndarray:
        """Values of one data column (sub-factor or passthrough factor)."""
        if column_id in self.passthrough_columns:
            return self.passthrough_columns[column_id]
        owner = next((m for m in self.matrices.values() if column_id in m.sub_factor_ids), None)
        if owner is None:
            raise DataValidationError("UNKNOWN_COLUMN", f"no column {column_id!r}", f"column {column_id}")
        return owner.column(column_id)

    def take(self, rows) -> "LabeledDataset":
        """New dataset with rows reordered/selected by index."""
        rows = np.asarray(rows, dtype=int)
        ids = tuple(self.alternative_ids[i] for i in rows)
        return LabeledDataset(
            hierarchy=self.hierarchy,
            matrices={k: DecisionMatrix(k, m.sub_factor_ids, m.values[rows], ids) for k, m in self.matrices.items()},
            passthrough_columns={k: v[rows] for k, v in self.passthrough_columns.items()},
            alternative_ids=ids,
            labels=tuple(self.labels[i] for i in rows) if self.is_labeled else None,
            class_names=self.class_names,
        )


# ── Validation ───────────────────────────────────────────────────────

@dataclass(frozen=True)
class Violation:
    code: str
    location: str
    message: str
    severity: str = ERROR

    def to_error(self) -> DataValidationError:
        return DataValidationError(self.code, self.message, self.location)


def check_hierarchy(h: FactorHierarchy) -> list[Violation]:
    """Unique non-empty ids; passthrough iff no sub-factors; at least one factor."""
    if not h.main_factors:
        return [Violation("EMPTY_HIERARCHY", "hierarchy", "hierarchy has no main factors")]
    ids = list(h.main_factor_ids) + [s.id for mf in h.main_factors for s in mf.sub_factors]
    seen: set[str] = set()
    dupes = [i for i in ids if i in seen or seen.add(i)]
    violations = [Violation("DUPLICATE_ID", f"id {i}", f"factor id {i!r} is used twice") for i in dict.fromkeys(dupes)]
    if any(not i.strip() for i in ids):
        violations.append(Violation("EMPTY_ID", "hierarchy", "factor ids must be non-empty"))
    violations += [
        Violation("PASSTHROUGH_MISMATCH", f"main factor {mf.id}",
                  "passthrough factors have no sub-factors; other factors need at least one")
        for mf in h.main_factors if mf.passthrough == bool(mf.sub_factors)
    ]
    return violations


def check_alternatives(ds: LabeledDataset) -> list[Violation]:
    violations = []
    if ds.m < 2:
        violations.append(Violation("TOO_FEW_ALTERNATIVES", "dataset", f"need at least 2 rows, got {ds.m}"))
    seen: set[str] = set()
    violations += [
        Violation("DUPLICATE_ALTERNATIVE", f"row {r}, column {ID_COLUMN}", f"alternative id {a!r} repeats")
        for r, a in enumerate(ds.alternative_ids, 1) if a in seen or seen.add(a)
    ]
    return violations


def check_shapes(ds: LabeledDataset) -> list[Violation]:
    """Every matrix/column matches the hierarchy and shares the row order."""
    violations = []
    for mf in ds.hierarchy.main_factors:
        store = ds.passthrough_columns if mf.passthrough else ds.matrices
        if mf.id not in store:
            violations.append(Violation("MISSING_FACTOR", f"main factor {mf.id}", "no data for main factor"))
            continue
        matrix = ds.matrices.get(mf.id)
        rows = len(store[mf.id]) if mf.passthrough else matrix.values.shape[0]
        if rows != ds.m or (matrix is not None and matrix.alternative_ids != ds.alternative_ids):
            violations.append(Violation("ROW_MISMATCH", f"main factor {mf.id}", "rows do not align with the dataset"))
        if matrix is not None and matrix.sub_factor_ids != mf.sub_factor_ids:
            violations.append(Violation("COLUMN_ORDER", f"main factor {mf.id}", "columns do not follow hierarchy order"))
    if ds.labels is not None and len(ds.labels) != ds.m:
        violations.append(Violation("ROW_MISMATCH", LABEL_COLUMN, "label count differs from row count"))
    return violations


def check_finite(ds: LabeledDataset) -> list[Violation]:
    blocks = [(m.sub_factor_ids, m.values) for m in ds.matrices.values()]
    blocks += [((k,), v.reshape(-1, 1)) for k, v in ds.passthrough_columns.items()]
    return [
        Violation("NON_FINITE", f"row {r + 1}, column {cols[c]}", "value is not finite")
        for cols, values in blocks for r, c in np.argwhere(~np.isfinite(values))
    ]


def check_labels(ds: LabeledDataset) -> list[Violation]:
    """Labels come from class_names; each class needs >= 2 rows (sample std)."""
    if not ds.is_labeled:
        return []
    known = set(ds.class_names)
    violations = [
        Violation("UNKNOWN_LABEL", f"row {r}, column {LABEL_COLUMN}", f"label {lab!r} not in class names")
        for r, lab in enumerate(ds.labels, 1) if lab not in known
    ]
    counts = {c: ds.labels.count(c) for c in ds.class_names}
    violations += [
        Violation("CLASS_TOO_SMALL", f"class {c}", f"class has {n} row(s); at least 2 are needed")
        for c, n in counts.items() if n < 2
    ]
    return violations


def check_constant_columns(ds: LabeledDataset) -> list[Violation]:
    """Constant sub-factor columns break min-max normalization (warning only)."""
    return [
        Violation("CONSTANT_COLUMN", f"column {sf}", "column is constant over all alternatives", WARNING)
        for m in ds.matrices.values() if m.values.shape[0] > 0
        for sf, col in zip(m.sub_factor_ids, m.values.T) if np.nanmax(col) == np.nanmin(col)
    ]


def validate(dataset: LabeledDataset) -> list[Violation]:
    """All invariant violations of a dataset; empty means valid."""
    return (
        check_hierarchy(dataset.hierarchy)
        + check_shapes(dataset)
        + check_alternatives(dataset)
        + check_finite(dataset)
        + check_labels(dataset)
        + check_constant_columns(dataset)
    )


# ── Loading / writing ────────────────────────────────────────────────

def _parse_numeric(frame: pd.DataFrame, columns: tuple[str, ...]) -> np.ndarray:
    """Float matrix of ``columns``; the first bad cell (row-major) is reported."""
    text = frame[list(columns)].astype(str).apply(lambda col: col.str.strip())
    values = text.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    bad = np.argwhere(~np.isfinite(values))
    if len(bad):
        r, c = bad[0]
        cell = text.iat[r, c]
        code, what = (("BLANK_CELL", "cell is blank") if cell == ""
                      else ("NON_NUMERIC", f"{cell!r} is not a finite number"))
        raise DataValidationError(code, what, f"row {r + 1}, column {columns[c]}")
    return values


def _check_columns(frame: pd.DataFrame, hierarchy: FactorHierarchy, label_column: str | None,
                   id_column: str) -> None:
    required = list(hierarchy.columns) + ([label_column] if label_column else [])
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DataValidationError("MISSING_COLUMN", "required column is absent", f"column {missing[0]}")
    allowed = set(required) | {id_column, LABEL_COLUMN}
    unknown = [c for c in frame.columns if c not in allowed]
    if unknown:
        raise DataValidationError("UNKNOWN_COLUMN", "column is not in the hierarchy", f"column {unknown[0]}")


def _alternative_ids(frame: pd.DataFrame, id_column: str) -> tuple[str, ...]:
    if id_column not in frame.columns:
        return tuple(f"row{k}" for k in range(1, len(frame) + 1))
    ids = tuple(str(v).strip() for v in frame[id_column])
    blank = next((r for r, a in enumerate(ids, 1) if not a), None)
    if blank is not None:
        raise DataValidationError("BLANK_CELL", "cell is blank", f"row {blank}, column {id_column}")
    return ids


def dataset_from_frame(frame: pd.DataFrame, hierarchy: FactorHierarchy, *,
                       label_column: str | None = LABEL_COLUMN,
                       id_column: str = ID_COLUMN) -> LabeledDataset:
    """Bind a string-typed frame to a hierarchy; ``label_column=None`` for unlabeled data."""
    if frame.empty:
        raise DataValidationError("EMPTY_DATASET", "dataset has no rows", "dataset")
    _check_columns(frame, hierarchy, label_column, id_column)
    ids = _alternative_ids(frame, id_column)
    values = dict(zip(hierarchy.columns, _parse_numeric(frame, hierarchy.columns).T))
    labels = None
    if label_column:
        labels = tuple(str(v).strip() for v in frame[label_column])
        blank = next((r for r, lab in enumerate(labels, 1) if not lab), None)
        if blank is not None:
            raise DataValidationError("BLANK_CELL", "cell is blank", f"row {blank}, column {label_column}")
    return LabeledDataset(
        hierarchy=hierarchy,
        matrices={
            mf.id: DecisionMatrix(mf.id, mf.sub_factor_ids, np.column_stack([values[s] for s in mf.sub_factor_ids]), ids)
            for mf in hierarchy.main_factors if not mf.passthrough
        },
        passthrough_columns={mf.id: values[mf.id] for mf in hierarchy.main_factors if mf.passthrough},
        alternative_ids=ids,
        labels=labels,
    )


def load_dataset(data_path: str | Path, hierarchy_path: str | Path, *,
                 label_column: str | None = LABEL_COLUMN,
                 id_column: str = ID_COLUMN) -> LabeledDataset:
    """Load and validate a dataset; raises on the first error-level violation."""
    hierarchy = load_hierarchy(hierarchy_path)
    frame = read_csv(data_path, dtype=str, keep_default_na=False)
    dataset = dataset_from_frame(frame, hierarchy, label_column=label_column, id_column=id_column)
    violations = validate(dataset)
    errors = [v for v in violations if v.severity == ERROR]
    if errors:
        raise errors[0].to_error()
    for v in violations:
        log.warning("%s at %s: %s", v.code, v.location, v.message)
    log.debug("loaded %s: %d rows, %d classes", data_path, dataset.m, len(dataset.class_names))
    return dataset


def dataset_to_frame(dataset: LabeledDataset, *, label_column: str = LABEL_COLUMN,
                     id_column: str = ID_COLUMN) -> pd.DataFrame:
    frame = pd.DataFrame({id_column: list(dataset.alternative_ids)})
    for column in dataset.hierarchy.columns:
        frame[column] = dataset.column(column)
    if dataset.is_labeled:
        frame[label_column] = list(dataset.labels)
    return frame


def write_dataset(dataset: LabeledDataset, path: str | Path, *, label_column: str = LABEL_COLUMN,
                  id_column: str = ID_COLUMN) -> Path:
    """Inverse of load_dataset; floats use shortest round-trip repr."""
    frame = dataset_to_frame(dataset, label_column=label_column, id_column=id_column)
    return atomic_write(path, frame.to_csv(index=False, lineterminator="\n"))


def slice_main_factor(dataset: LabeledDataset, main_factor_id: str) -> DecisionMatrix:
    """Copy of one main factor's decision matrix."""
    mf = dataset.hierarchy.get(main_factor_id)
    if mf.passthrough:
        raise DataValidationError(
            "PASSTHROUGH_FACTOR", "passthrough factor has no sub-factor matrix", f"main factor {main_factor_id}"
        )
    source = dataset.matrices[main_factor_id]
    return DecisionMatrix(source.main_factor_id, source.sub_factor_ids, source.values.copy(), source.alternative_ids)


if __name__ == "__main__":
    if len(sys.argv) < 3:
        print("usage: dataset.py DATA.csv HIERARCHY.json", file=sys.stderr)
        sys.exit(2)
    ds = load_dataset(sys.argv[1], sys.argv[2])
    print(f"{ds.m} rows | classes: {', '.join(ds.class_names) or '(unlabeled)'}")
    for v in validate(ds):
        print(f"{v.location} [{v.code}] {v.message} ({v.severity})")
