"""Improved Mahalanobis-Taguchi classifier — one model per class, least MD wins.

A class model is fitted from that class's normal observations only:
  z    = (x - mean) / std            (sample std, n - 1 denominator)
  C    = Z^T Z / (n - 1)             (correlation matrix of the class)
  MD   = sqrt(z^T C^-1 z / k)        (k = number of features)
Test rows are standardized with the model's own mean/std. C^-1 comes from a
spectral decomposition under an inversion policy; with fewer observations
than features C is singular, so the default is a truncated pseudo-inverse.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import linalg

from aggregate import RankingScoreMatrix
from artifacts import json_text, read_text
from errors import ConfigError, DataValidationError, NumericError

log = logging.getLogger(__name__)

PINV_RCOND = 1e-10          # eigenvalues below rcond * lambda_max are dropped
SINGULAR_CONDITION = 1e12   # Strict refuses matrices worse than this
DEFAULT_RIDGE_EPSILON = 1e-8


class InversionKind(str, Enum):
    STRICT = "strict"
    PSEUDO_INVERSE = "pinv"
    RIDGE = "ridge"


class ZeroStdPolicy(str, Enum):
    ERROR = "error"
    DROP = "drop"


@dataclass(frozen=True)
class InversionPolicy:
    kind: InversionKind = InversionKind.PSEUDO_INVERSE
    epsilon: float = DEFAULT_RIDGE_EPSILON

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", InversionKind(self.kind))
        if self.kind is InversionKind.RIDGE and not self.epsilon > 0:
            raise ConfigError("BAD_EPSILON", f"ridge epsilon must be > 0, got {self.epsilon}", "inversion_policy")

    @classmethod
    def parse(cls, text: str, epsilon: float | None = None) -> "InversionPolicy":
        """'pinv', 'strict', 'ridge' or 'ridge:1e-6'."""
        name, _, eps = str(text).partition(":")
        try:
            kind = InversionKind(name.strip().lower())
            value = float(eps) if eps else (epsilon if epsilon is not None else DEFAULT_RIDGE_EPSILON)
        except ValueError as e:
            raise ConfigError("BAD_POLICY", f"unknown inversion policy {text!r}", "inversion_policy") from e
        return cls(kind, value)

    def __str__(self) -> str:
        return f"ridge:{self.epsilon:g}" if self.kind is InversionKind.RIDGE else self.kind.value


@dataclass(frozen=True)
class InversionInfo:
    policy: str
    rank: int
    condition: float


@dataclass(frozen=True)
class ClassModel:
    class_name: str
    feature_ids: tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray
    inv_correlation: np.ndarray
    inversion: InversionInfo
    n_train: int
    dropped_features: tuple[str, ...] = field(default=())

    @property
    def active_features(self) -> tuple[str, ...]:
        return tuple(f for f in self.feature_ids if f not in self.dropped_features)

    @property
    def k(self) -> int:
        return len(self.active_features)

    def to_dict(self) -> dict:
        return {
            "class_name": self.class_name,
            "feature_ids": list(self.feature_ids),
            "dropped_features": list(self.dropped_features),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "inv_correlation": self.inv_correlation.tolist(),
            "inversion": {"policy": self.inversion.policy, "rank": self.inversion.rank,
                          "condition": self.inversion.condition if np.isfinite(self.inversion.condition) else None},
            "n_train": self.n_train,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ClassModel":
        try:
            inv = doc["inversion"]
            condition = inv.get("condition")
            return cls(
                class_name=str(doc["class_name"]),
                feature_ids=tuple(doc["feature_ids"]),
                means=np.asarray(doc["means"], dtype=float),
                stds=np.asarray(doc["stds"], dtype=float),
                inv_correlation=np.asarray(doc["inv_correlation"], dtype=float),
                inversion=InversionInfo(str(inv["policy"]), int(inv["rank"]),
                                        float("inf") if condition is None else float(condition)),
                n_train=int(doc["n_train"]),
                dropped_features=tuple(doc.get("dropped_features", ())),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DataValidationError("BAD_MODEL", f"malformed model document ({e})") from e


@dataclass(frozen=True)
class ClassificationResult:
    alternative_id: str
    distances: dict[str, float]
    predicted: str
    tie: bool = False


# ── Fitting ──────────────────────────────────────────────────────────

def _invert(corr: np.ndarray, policy: InversionPolicy) -> tuple[np.ndarray, InversionInfo]:
    """Spectral inverse of a symmetric correlation matrix under ``policy``."""
    eigvals, eigvecs = linalg.eigh(corr)
    lam_max = float(eigvals.max())
    keep = eigvals > PINV_RCOND * lam_max
    rank = int(keep.sum())
    lam_min = float(eigvals.min())
    condition = lam_max / lam_min if lam_min > 0 else float("inf")
    if policy.kind is InversionKind.STRICT:
        if condition > SINGULAR_CONDITION:
            raise NumericError("SINGULAR", f"correlation matrix is singular (condition {condition:.3g}, rank {rank})")
        inv_vals = 1.0 / eigvals
    elif policy.kind is InversionKind.RIDGE:
        inv_vals = 1.0 / (eigvals + policy.epsilon)
    else:
        inv_vals = np.where(keep, 1.0 / np.where(keep, eigvals, 1.0), 0.0)
    inv = (eigvecs * inv_vals) @ eigvecs.T
    return (inv + inv.T) / 2.0, InversionInfo(str(policy), rank, condition)


def _zero_std(stds: np.ndarray, means: np.ndarray) -> np.ndarray:
    return stds <= np.finfo(float).eps * np.maximum(1.0, np.abs(means))


def fit_class_model(class_name: str, feature_ids, observations,
                    policy: InversionPolicy = InversionPolicy(),
                    zero_std: ZeroStdPolicy = ZeroStdPolicy.ERROR) -> ClassModel:
    """Fit one class from its normal observations (rows x features)."""
    x = np.asarray(observations, dtype=float)
    feature_ids = tuple(feature_ids)
    n = x.shape[0]
    if n < 2:
        raise DataValidationError("CLASS_TOO_SMALL", f"{n} observation(s); at least 2 are needed", f"class {class_name}")
    means = x.mean(axis=0)
    stds = x.std(axis=0, ddof=1)
    flat = _zero_std(stds, means)
    if flat.any() and ZeroStdPolicy(zero_std) is ZeroStdPolicy.ERROR:
        feature = feature_ids[int(np.argmax(flat))]
        raise NumericError("ZERO_STD", "feature is constant within the class", f"class {class_name}, feature {feature}")
    dropped = tuple(f for f, bad in zip(feature_ids, flat) if bad)
    if dropped:
        log.warning("class %s: dropping constant feature(s) %s", class_name, ", ".join(dropped))
    if len(dropped) == len(feature_ids):
        raise NumericError("ZERO_STD", "every feature is constant within the class", f"class {class_name}")
    active = ~flat
    z = (x[:, active] - means[active]) / stds[active]
    corr = z.T @ z / (n - 1)
    corr = (corr + corr.T) / 2.0
    try:
        inv, info = _invert(corr, policy)
    except NumericError as e:
        raise e.at(f"class {class_name}")
    if info.rank < corr.shape[0]:
        log.warning("class %s: correlation matrix rank %d of %d (%s)", class_name, info.rank, corr.shape[0], info.policy)
    return ClassModel(class_name, feature_ids, means[active], stds[active], inv, info, n, dropped)


def fit_models(scores: RankingScoreMatrix, policy: InversionPolicy = InversionPolicy(),
               zero_std: ZeroStdPolicy = ZeroStdPolicy.ERROR) -> list[ClassModel]:
    """One model per class, in the score matrix's class order."""
    return [
        fit_class_model(c, scores.main_factor_ids, scores.values[scores.class_rows(c)], policy, zero_std)
        for c in scores.class_names
    ]


# ── Distances ────────────────────────────────────────────────────────

def _standardize(model: ClassModel, rows: np.ndarray) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != len(model.feature_ids):
        raise DataValidationError(
            "DIMENSION_MISMATCH", f"observation has {rows.shape[1]} features, model expects {len(model.feature_ids)}",
            f"class {model.class_name}",
        )
    active = [i for i, f in enumerate(model.feature_ids) if f not in model.dropped_features]
    return (rows[:, active] - model.means) / model.stds


def distances(model: ClassModel, rows) -> np.ndarray:
    """MD of each row against the model."""
    z = _standardize(model, rows)
    quad = np.einsum("ij,jk,ik->i", z, model.inv_correlation, z)
    return np.sqrt(np.maximum(quad, 0.0) / model.k)


def training_distances(model: ClassModel, observations) -> np.ndarray:
    return distances(model, observations)


def test_distance(model: ClassModel, observation) -> float:
    """MD of one test observation, standardized with the model statistics."""
    observation = np.asarray(observation, dtype=float)
    if observation.ndim != 1:
        raise DataValidationError("DIMENSION_MISMATCH", "expected a single observation vector",
                                  f"class {model.class_name}")
    return float(distances(model, observation)[0])


# ── Classification ───────────────────────────────────────────────────

def _check_models(models: list[ClassModel]) -> None:
    if len(models) < 2:
        raise DataValidationError("TOO_FEW_MODELS", f"need at least 2 class models, got {len(models)}", "models")
    shared = models[0].feature_ids
    odd = next((m for m in models if m.feature_ids != shared), None)
    if odd is not None:
        raise DataValidationError("FEATURE_MISMATCH", "models disagree on feature ids", f"class {odd.class_name}")


def _result(alternative_id: str, models: list[ClassModel], row_distances) -> ClassificationResult:
    dist = {m.class_name: float(d) for m, d in zip(models, row_distances)}
    best = min(dist.values())
    winners = [c for c, d in dist.items() if d == best]
    return ClassificationResult(alternative_id, dist, winners[0], tie=len(winners) > 1)


def classify(models: list[ClassModel], observation, alternative_id: str = "") -> ClassificationResult:
    """Least-MD rule; ties go to the earlier model and are flagged."""
    _check_models(models)
    return _result(alternative_id, models, [test_distance(m, observation) for m in models])


def classify_scores(models: list[ClassModel], scores: RankingScoreMatrix) -> list[ClassificationResult]:
    """Classify every row of a score matrix (columns matched by feature id)."""
    _check_models(models)
    missing = [f for f in models[0].feature_ids if f not in scores.main_factor_ids]
    if missing:
        raise DataValidationError("MISSING_COLUMN", "scores lack a model feature", f"column {missing[0]}")
    cols = [scores.main_factor_ids.index(f) for f in models[0].feature_ids]
    table = np.column_stack([distances(m, scores.values[:, cols]) for m in models])
    return [_result(a, models, row) for a, row in zip(scores.alternative_ids, table)]


# ── Model files ──────────────────────────────────────────────────────

def model_json(model: ClassModel) -> str:
    return json_text(model.to_dict(), exact=True)


def read_model(path: str | Path) -> ClassModel:
    try:
        return ClassModel.from_dict(json.loads(read_text(path)))
    except json.JSONDecodeError as e:
        raise DataValidationError("BAD_MODEL", f"invalid JSON ({e.msg})", str(path)) from e


def read_models(paths: list[str | Path]) -> list[ClassModel]:
    """Models from files and/or directories (``*.json`` sorted by name)."""
    files = [f for p in map(Path, paths) for f in (sorted(p.glob("*.json")) if p.is_dir() else [p])]
    return [read_model(f) for f in files]


def model_filename(index: int, class_name: str, count: int = 0) -> str:
    """``01_paddy.json``; the index prefix keeps class order on reload.

    The prefix is zero-padded to the width of ``count`` (at least 2 digits)
    so name order matches index order for any number of classes.
    """
    slug = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in class_name)
    width = max(2, len(str(count)))
    return f"{index:0{width}d}_{slug}.json"


test_distance.__test__ = False  # not a pytest test
