"""Grey correlation weighting of the sub-factors under one main factor.

Steps, per decision matrix X (alternatives x sub-factors):
  1. comparability sequence   Y = column-wise min-max of X (benefit type)
  2. relational degree        delta = |1 - Y|  (distance to the all-ones ideal)
  3. grey coefficient         C = (dmin + th*dmax) / (delta + th*dmax)
  4. correlation degree       C_j = mean of column j over the alternatives
  5. weights                  w_j = C_j / sum(C)

dmin/dmax are taken over the whole delta matrix, th defaults to 0.5.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from dataset import DecisionMatrix, LabeledDataset, slice_main_factor
from errors import ConfigError, DataValidationError, NumericError

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5


class ConstantColumnPolicy(str, Enum):
    ERROR = "error"
    TREAT_AS_IDEAL = "ideal"


@dataclass(frozen=True)
class GreyConfig:
    threshold: float = DEFAULT_THRESHOLD
    constant_column_policy: ConstantColumnPolicy = ConstantColumnPolicy.ERROR

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError("BAD_THRESHOLD", f"threshold must be in (0, 1], got {self.threshold}", "grey.threshold")
        object.__setattr__(self, "constant_column_policy", ConstantColumnPolicy(self.constant_column_policy))


def _readonly(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=float)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class ComparabilityMatrix:
    values: np.ndarray
    sub_factor_ids: tuple[str, ...]
    alternative_ids: tuple[str, ...]


@dataclass(frozen=True)
class RelationalDegreeMatrix:
    values: np.ndarray
    sub_factor_ids: tuple[str, ...]
    alternative_ids: tuple[str, ...]


@dataclass(frozen=True)
class GreyCoefficientMatrix:
    values: np.ndarray
    delta_min: float
    delta_max: float
    sub_factor_ids: tuple[str, ...]
    alternative_ids: tuple[str, ...]
    degenerate: bool = False


@dataclass(frozen=True)
class WeightVector:
    main_factor_id: str
    sub_factor_ids: tuple[str, ...]
    weights: np.ndarray
    correlation_degrees: np.ndarray

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.sub_factor_ids, map(float, self.weights)))


@dataclass(frozen=True)
class GreyAnalysis:
    """All intermediates of one grey weighting run."""
    comparability: ComparabilityMatrix
    delta: RelationalDegreeMatrix
    coefficients: GreyCoefficientMatrix
    weights: WeightVector


# ── Equations ────────────────────────────────────────────────────────

def comparability(matrix: DecisionMatrix, config: GreyConfig = GreyConfig()) -> ComparabilityMatrix:
    """Min-max normalize each column; constant columns follow the config policy."""
    x = matrix.values
    if x.shape[0] < 2:
        raise DataValidationError("TOO_FEW_ALTERNATIVES", "need at least 2 alternatives",
                                  f"main factor {matrix.main_factor_id}")
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = hi - lo
    constant = span == 0
    if constant.any() and config.constant_column_policy is ConstantColumnPolicy.ERROR:
        col = matrix.sub_factor_ids[int(np.argmax(constant))]
        raise DataValidationError("CONSTANT_COLUMN", "column is constant; min-max normalization is undefined",
                                  f"column {col}")
    for col in np.asarray(matrix.sub_factor_ids)[constant]:
        log.warning("CONSTANT_COLUMN %s treated as ideal (all ones)", col)
    y = np.ones_like(x)
    varying = ~constant
    y[:, varying] = (x[:, varying] - lo[varying]) / span[varying]
    return ComparabilityMatrix(_readonly(y), matrix.sub_factor_ids, matrix.alternative_ids)


def relational_degree(comp: ComparabilityMatrix) -> RelationalDegreeMatrix:
    """delta_ij = |Y_0j - Y_ij| with the all-ones reference sequence."""
    return RelationalDegreeMatrix(_readonly(np.abs(1.0 - comp.values)), comp.sub_factor_ids, comp.alternative_ids)


def grey_coefficient(delta: RelationalDegreeMatrix, config: GreyConfig = GreyConfig()) -> GreyCoefficientMatrix:
    d = delta.values
    d_min, d_max = float(d.min()), float(d.max())
    if d_max == 0.0:
        log.warning("all alternatives are ideal (delta = 0); grey coefficients set to 1")
        return GreyCoefficientMatrix(_readonly(np.ones_like(d)), d_min, d_max,
                                     delta.sub_factor_ids, delta.alternative_ids, degenerate=True)
    scale = config.threshold * d_max
    coeff = (d_min + scale) / (d + scale)
    return GreyCoefficientMatrix(_readonly(coeff), d_min, d_max, delta.sub_factor_ids, delta.alternative_ids)


def correlation_degree(coeff: GreyCoefficientMatrix) -> np.ndarray:
    """Column means over the alternatives, one value per sub-factor."""
    return _readonly(coeff.values.mean(axis=0))


def weights(degrees, main_factor_id: str, sub_factor_ids: tuple[str, ...] | None = None) -> WeightVector:
    degrees = np.asarray(degrees, dtype=float)
    if np.any(degrees <= 0) or not np.all(np.isfinite(degrees)):
        raise NumericError("NON_POSITIVE_DEGREE", "correlation degrees must be positive and finite",
                           f"main factor {main_factor_id}")
    ids = tuple(sub_factor_ids) if sub_factor_ids is not None else tuple(f"sf{j}" for j in range(1, len(degrees) + 1))
    return WeightVector(main_factor_id, ids, _readonly(degrees / degrees.sum()), _readonly(degrees))


# ── Composites ───────────────────────────────────────────────────────

def grey_analysis(matrix: DecisionMatrix, config: GreyConfig = GreyConfig()) -> GreyAnalysis:
    comp = comparability(matrix, config)
    delta = relational_degree(comp)
    coeff = grey_coefficient(delta, config)
    vector = weights(correlation_degree(coeff), matrix.main_factor_id, matrix.sub_factor_ids)
    return GreyAnalysis(comp, delta, coeff, vector)


def grey_weights(matrix: DecisionMatrix, config: GreyConfig = GreyConfig()) -> WeightVector:
    return grey_analysis(matrix, config).weights


def dataset_weights(dataset: LabeledDataset, config: GreyConfig = GreyConfig()) -> dict[str, GreyAnalysis]:
    """Grey analysis for every non-passthrough main factor, in hierarchy order."""
    return {
        mf.id: grey_analysis(slice_main_factor(dataset, mf.id), config)
        for mf in dataset.hierarchy.main_factors if not mf.passthrough
    }
