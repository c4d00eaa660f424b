"""Classifier evaluation: confusion statistics, error rates, k-fold CV.

Precision/recall are one-vs-rest per class; the headline figures are
support-weighted averages, macro averages are reported alongside. Error rates
compare predicted class probabilities with the one-hot truth over all m x C
cells, relative to a ZeroR (class-prior) baseline. All figures are percents.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix

from aggregate import RankingScoreMatrix
from artifacts import csv_text, read_csv
from dataset import ID_COLUMN, LABEL_COLUMN
from errors import ConfigError, DataValidationError, ImtsError
from imts import ClassificationResult, InversionPolicy, ZeroStdPolicy, classify_scores, fit_models

log = logging.getLogger(__name__)

PROBABILITY_TOLERANCE = 1e-9
PROB_PREFIX = "prob_"


@dataclass(frozen=True)
class ConfusionMatrix:
    class_names: tuple[str, ...]
    counts: np.ndarray  # rows = truth, columns = predicted

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassificationScores:
    accuracy: float
    precision_per_class: np.ndarray
    recall_per_class: np.ndarray
    precision_macro: float
    recall_macro: float
    precision_weighted: float
    recall_weighted: float
    undefined_precision: tuple[str, ...] = ()


@dataclass(frozen=True)
class ErrorRates:
    mae: float
    rmse: float
    rae: float
    rrse: float
    note: str = ""


@dataclass(frozen=True)
class EvaluationReport:
    classifier: str
    class_names: tuple[str, ...]
    confusion: ConfusionMatrix
    scores: ClassificationScores
    errors: ErrorRates
    folds: int | None = None
    seed: int | None = None
    notes: tuple[str, ...] = ()

    @property
    def accuracy(self) -> float:
        return self.scores.accuracy

    def summary(self) -> dict:
        """The Table 8/9 style row: headline precision/recall are weighted."""
        return {
            "classifier": self.classifier,
            "accuracy": self.scores.accuracy,
            "precision": self.scores.precision_weighted,
            "recall": self.scores.recall_weighted,
            "mae": self.errors.mae,
            "rmse": self.errors.rmse,
            "rae": self.errors.rae,
            "rrse": self.errors.rrse,
        }

    def to_dict(self) -> dict:
        s = self.scores
        return {
            "classifier": self.classifier,
            "folds": self.folds,
            "seed": self.seed,
            "class_names": list(self.class_names),
            "accuracy": s.accuracy,
            "precision_weighted": s.precision_weighted,
            "recall_weighted": s.recall_weighted,
            "precision_macro": s.precision_macro,
            "recall_macro": s.recall_macro,
            "precision_per_class": dict(zip(self.class_names, map(float, s.precision_per_class))),
            "recall_per_class": dict(zip(self.class_names, map(float, s.recall_per_class))),
            "undefined_precision": list(s.undefined_precision),
            "mae": self.errors.mae,
            "rmse": self.errors.rmse,
            "rae": self.errors.rae,
            "rrse": self.errors.rrse,
            "confusion": self.confusion.counts.tolist(),
            "notes": [n for n in (*self.notes, self.errors.note) if n],
        }


@dataclass(frozen=True)
class RowPrediction:
    alternative_id: str
    fold: int
    truth: str
    predicted: str
    distances: dict[str, float]
    tie: bool = False


@dataclass(frozen=True)
class CrossValidation:
    report: EvaluationReport
    fold_of_row: np.ndarray
    predictions: tuple[RowPrediction, ...] = field(default=())


# ── Confusion statistics ─────────────────────────────────────────────

def confusion(truth, predicted, class_names) -> ConfusionMatrix:
    truth = [str(t) for t in truth]
    predicted = [str(p) for p in predicted]
    class_names = tuple(class_names)
    if len(truth) != len(predicted):
        raise DataValidationError("LENGTH_MISMATCH", f"{len(truth)} truth labels, {len(predicted)} predictions")
    if not truth:
        raise DataValidationError("EMPTY_MATRIX", "nothing to evaluate")
    known = set(class_names)
    for i, label in enumerate(l for pair in zip(truth, predicted) for l in pair):
        if label not in known:
            raise DataValidationError("UNKNOWN_LABEL", f"label {label!r} is not a known class", f"row {i // 2 + 1}")
    counts = confusion_matrix(truth, predicted, labels=list(class_names))
    return ConfusionMatrix(class_names, counts.astype(int))


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return np.divide(num, den, out=np.zeros_like(num, dtype=float), where=den > 0)


def classification_scores(cm: ConfusionMatrix) -> ClassificationScores:
    """Accuracy, per-class precision/recall and their macro/weighted means."""
    counts = np.asarray(cm.counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise DataValidationError("EMPTY_MATRIX", "confusion matrix has no entries")
    tp = np.diag(counts)
    predicted = counts.sum(axis=0)
    support = counts.sum(axis=1)
    precision = 100.0 * _ratio(tp, predicted)
    recall = 100.0 * _ratio(tp, support)
    undefined = tuple(c for c, n in zip(cm.class_names, predicted) if n == 0)
    if undefined:
        log.info("precision undefined (no predictions) for %s; reported as 0", ", ".join(undefined))
    share = support / total
    return ClassificationScores(
        accuracy=100.0 * tp.sum() / total,
        precision_per_class=precision,
        recall_per_class=recall,
        precision_macro=float(precision.mean()),
        recall_macro=float(recall.mean()),
        precision_weighted=float(precision @ share),
        recall_weighted=float(recall @ share),
        undefined_precision=undefined,
    )


# ── Error rates ──────────────────────────────────────────────────────

def one_hot(labels, class_names) -> np.ndarray:
    index = {c: j for j, c in enumerate(class_names)}
    out = np.zeros((len(labels), len(class_names)))
    out[np.arange(len(labels)), [index[str(l)] for l in labels]] = 1.0
    return out


def class_priors(labels, class_names) -> np.ndarray:
    labels = [str(l) for l in labels]
    return np.array([labels.count(c) for c in class_names], dtype=float) / len(labels)


def error_rates(truth_onehot, predicted_prob, baseline_prob) -> ErrorRates:
    """MAE/RMSE over all cells, RAE/RRSE relative to the baseline predictor.

    ``baseline_prob`` is a class-prior vector or one prior row per test row.
    """
    t = np.asarray(truth_onehot, dtype=float)
    p = np.asarray(predicted_prob, dtype=float)
    if t.shape != p.shape:
        raise DataValidationError("SHAPE_MISMATCH", f"truth {t.shape} vs predictions {p.shape}")
    outside = np.argwhere(~(np.isfinite(p) & (p >= 0.0) & (p <= 1.0)))
    if len(outside):
        r, c = outside[0]
        raise DataValidationError("BAD_PROBABILITIES", f"probability {p[r, c]} is not in [0, 1]",
                                  f"row {r + 1}, column {c + 1}")
    bad = np.flatnonzero(np.abs(p.sum(axis=1) - 1.0) > PROBABILITY_TOLERANCE)
    if len(bad):
        raise DataValidationError("BAD_PROBABILITIES", "probabilities do not sum to 1", f"row {bad[0] + 1}")
    base = np.broadcast_to(np.asarray(baseline_prob, dtype=float), t.shape)
    mae = np.abs(p - t).mean()
    rmse = np.sqrt(((p - t) ** 2).mean())
    base_mae = np.abs(base - t).mean()
    base_rmse = np.sqrt(((base - t) ** 2).mean())
    if base_mae == 0.0:
        return ErrorRates(100.0 * mae, 100.0 * rmse, float("nan"), float("nan"),
                          note="baseline error is zero (single-class truth); RAE and RRSE are undefined")
    return ErrorRates(100.0 * mae, 100.0 * rmse, 100.0 * mae / base_mae, 100.0 * rmse / base_rmse)


def _report(classifier: str, class_names, truth, predicted, probabilities, baseline,
            folds: int | None = None, seed: int | None = None, notes: tuple[str, ...] = ()) -> EvaluationReport:
    cm = confusion(truth, predicted, class_names)
    rates = error_rates(one_hot(truth, class_names), probabilities, baseline)
    return EvaluationReport(classifier, tuple(class_names), cm, classification_scores(cm), rates, folds, seed, notes)


def evaluate_predictions(truth, predicted, class_names, probabilities=None,
                         classifier: str = "imported") -> EvaluationReport:
    """Score a finished set of predictions; hard one-hot when no probabilities.

    The ZeroR baseline is the class-prior distribution of ``truth``.
    """
    probs = one_hot(predicted, class_names) if probabilities is None else probabilities
    return _report(classifier, class_names, truth, predicted, probs, class_priors(truth, class_names))


# ── Cross-validation ─────────────────────────────────────────────────

def stratified_folds(labels, class_names, k: int, seed: int) -> np.ndarray:
    """0-based fold index per row: per-class seeded shuffle, dealt round-robin.

    The dealing offset carries over between classes, so fold sizes differ by
    at most one overall as well as within each class.
    """
    labels = np.asarray([str(l) for l in labels])
    # negative seeds wrap into the unsigned 64-bit range numpy accepts
    rng = np.random.default_rng(seed % 2**64)
    fold_of_row = np.empty(len(labels), dtype=int)
    offset = 0
    for c in class_names:
        rows = rng.permutation(np.flatnonzero(labels == c))
        fold_of_row[rows] = (offset + np.arange(len(rows))) % k
        offset = (offset + len(rows)) % k
    return fold_of_row


def _check_folds(scores: RankingScoreMatrix, fold_of_row: np.ndarray, k: int) -> None:
    labels = np.asarray(scores.labels)
    for i in range(k):
        train = labels[fold_of_row != i]
        starved = next((c for c in scores.class_names if not (train == c).any()), None)
        if starved is not None:
            raise DataValidationError("ZERO_TRAIN_CLASS", "no training rows left for the class; use fewer folds",
                                      f"fold {i + 1}, class {starved}")
        size = int((fold_of_row == i).sum())
        if size < len(scores.class_names):
            log.warning("fold %d holds %d row(s), fewer than the %d classes", i + 1, size, len(scores.class_names))


def kfold_evaluate(scores: RankingScoreMatrix, k_folds: int = 10, seed: int = 42,
                   policy: InversionPolicy = InversionPolicy(),
                   zero_std: ZeroStdPolicy = ZeroStdPolicy.ERROR) -> CrossValidation:
    """Stratified k-fold CV of the least-MD classifier, metrics pooled over folds."""
    if scores.labels is None:
        raise DataValidationError("UNLABELED", "cross-validation needs labeled scores", LABEL_COLUMN)
    if k_folds < 2:
        raise ConfigError("BAD_FOLDS", f"folds must be >= 2, got {k_folds}", "folds")
    if k_folds > scores.m:
        raise ConfigError("BAD_FOLDS", f"{k_folds} folds for {scores.m} rows", "folds")
    class_names = scores.class_names
    fold_of_row = stratified_folds(scores.labels, class_names, k_folds, seed)
    _check_folds(scores, fold_of_row, k_folds)

    results: dict[int, ClassificationResult] = {}
    baseline = np.zeros((scores.m, len(class_names)))
    for i in range(k_folds):
        test_rows = np.flatnonzero(fold_of_row == i)
        train = scores.take(np.flatnonzero(fold_of_row != i))
        try:
            models = fit_models(train, policy, zero_std)
            fold_results = classify_scores(models, scores.take(test_rows))
        except ImtsError as e:
            raise e.at(f"fold {i + 1}")
        results.update(zip(test_rows.tolist(), fold_results))
        baseline[test_rows] = class_priors(train.labels, class_names)
        log.debug("fold %d: %d train, %d test", i + 1, train.m, len(test_rows))

    ordered = [results[r] for r in range(scores.m)]
    predicted = [r.predicted for r in ordered]
    notes = (f"{k_folds} folds over {scores.m} rows; some folds are smaller than the class count",) \
        if scores.m < k_folds * len(class_names) else ()
    report = _report("IMTS", class_names, scores.labels, predicted, one_hot(predicted, class_names),
                     baseline, k_folds, seed, notes)
    rows = tuple(
        RowPrediction(r.alternative_id, int(fold_of_row[i]) + 1, scores.labels[i], r.predicted, r.distances, r.tie)
        for i, r in enumerate(ordered)
    )
    return CrossValidation(report, fold_of_row, rows)


def resubstitution_evaluate(scores: RankingScoreMatrix, policy: InversionPolicy = InversionPolicy(),
                            zero_std: ZeroStdPolicy = ZeroStdPolicy.ERROR) -> tuple[EvaluationReport, list]:
    """Train on every row and classify the same rows."""
    if scores.labels is None:
        raise DataValidationError("UNLABELED", "evaluation needs labeled scores", LABEL_COLUMN)
    results = classify_scores(fit_models(scores, policy, zero_std), scores)
    predicted = [r.predicted for r in results]
    report = _report("IMTS", scores.class_names, scores.labels, predicted,
                     one_hot(predicted, scores.class_names), class_priors(scores.labels, scores.class_names),
                     notes=("resubstitution: trained and tested on the same rows",))
    return report, results


# ── Imported predictions ─────────────────────────────────────────────

def read_imported(path, scores: RankingScoreMatrix) -> tuple[list[str], list[str], np.ndarray | None]:
    """Truth, predictions and optional probabilities for an external classifier.

    The file has ``alternative_id``, ``predicted`` and optionally one
    ``prob_<class>`` column per class; truth comes from ``scores``.
    """
    frame = read_csv(path, dtype={ID_COLUMN: str, "predicted": str})
    for col in (ID_COLUMN, "predicted"):
        if col not in frame.columns:
            raise DataValidationError("MISSING_COLUMN", "required column is absent", f"{path}, column {col}")
    truth_of = dict(zip(scores.alternative_ids, scores.labels or ()))
    unknown = next((a for a in frame[ID_COLUMN] if str(a).strip() not in truth_of), None)
    if unknown is not None:
        raise DataValidationError("UNKNOWN_ALTERNATIVE", f"alternative {unknown!r} is not in the scores", str(path))
    ids = frame[ID_COLUMN].astype(str).str.strip()
    dup = ids[ids.duplicated()]
    if len(dup):
        raise DataValidationError("DUPLICATE_ALTERNATIVE", f"alternative {dup.iloc[0]!r} appears more than once",
                                  f"{path}, row {dup.index[0] + 1}")
    truth = [truth_of[a] for a in ids]
    predicted = [str(p).strip() for p in frame["predicted"]]
    prob_cols = [c for c in frame.columns if c.startswith(PROB_PREFIX)]
    if not prob_cols:
        return truth, predicted, None
    wanted = [PROB_PREFIX + c for c in scores.class_names]
    missing = [c for c in wanted if c not in frame.columns]
    if missing:
        raise DataValidationError("MISSING_COLUMN", "probability column is absent", f"{path}, column {missing[0]}")
    probs = frame[wanted].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    outside = np.argwhere(~(np.isfinite(probs) & (probs >= 0.0) & (probs <= 1.0)))
    if len(outside):
        r, c = outside[0]
        cell = frame[wanted[c]].iloc[r]
        raise DataValidationError("BAD_PROBABILITIES", f"{cell!r} is not a probability in [0, 1]",
                                  f"{path}, row {r + 1}, column {wanted[c]}")
    return truth, predicted, probs


# ── Rendering ────────────────────────────────────────────────────────

def report_frame(reports: dict[str, EvaluationReport]) -> pd.DataFrame:
    """One row per evaluation section, per-class columns after the summary."""
    rows = []
    for section, r in reports.items():
        d = r.to_dict()
        row = {"section": section, "classifier": r.classifier, "folds": r.folds, "seed": r.seed,
               **{k: d[k] for k in ("accuracy", "precision_weighted", "recall_weighted", "precision_macro",
                                    "recall_macro", "mae", "rmse", "rae", "rrse")}}
        row.update({f"precision_{c}": v for c, v in d["precision_per_class"].items()})
        row.update({f"recall_{c}": v for c, v in d["recall_per_class"].items()})
        rows.append(row)
    frame = pd.DataFrame(rows)
    for col in ("folds", "seed"):
        frame[col] = frame[col].astype("Int64")
    return frame


def report_table(reports: dict[str, EvaluationReport]) -> str:
    """Aligned text: one block per section with the per-class breakdown."""
    blocks = []
    for section, r in reports.items():
        s = r.scores
        head = f"{section} ({r.classifier}" + (f", {r.folds} folds, seed {r.seed})" if r.folds else ")")
        per_class = pd.DataFrame(
            {"precision": s.precision_per_class, "recall": s.recall_per_class,
             "support": r.confusion.counts.sum(axis=1)},
            index=list(r.class_names),
        )
        summary = pd.Series(r.summary()).drop("classifier").astype(float)
        blocks.append("\n".join([
            head,
            summary.to_string(float_format=lambda v: f"{v:10.4f}"),
            per_class.to_string(float_format=lambda v: f"{v:.4f}"),
            *[f"note: {n}" for n in r.to_dict()["notes"]],
        ]))
    return "\n\n".join(blocks) + "\n"


def comparison_frame(reports: list[EvaluationReport]) -> pd.DataFrame:
    return pd.DataFrame([r.summary() for r in reports],
                        columns=["classifier", "accuracy", "precision", "recall", "mae", "rmse", "rae", "rrse"])


def predictions_frame(rows, class_names) -> pd.DataFrame:
    """Per-row CV output: id, fold, truth, predicted, one MD column per class, tie."""
    return pd.DataFrame(
        [(r.alternative_id, r.fold, r.truth, r.predicted, *(r.distances[c] for c in class_names), r.tie)
         for r in rows],
        columns=[ID_COLUMN, "fold", "truth", "predicted", *(f"md_{c}" for c in class_names), "tie"],
    )


def classification_frame(results: list[ClassificationResult], class_names) -> pd.DataFrame:
    return pd.DataFrame(
        [(r.alternative_id, *(r.distances[c] for c in class_names), r.predicted, r.tie) for r in results],
        columns=[ID_COLUMN, *(f"md_{c}" for c in class_names), "predicted", "tie"],
    )


def report_csv(reports: dict[str, EvaluationReport]) -> str:
    return csv_text(report_frame(reports))
