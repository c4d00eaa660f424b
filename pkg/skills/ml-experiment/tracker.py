"""MLflow experiment tracker for the IMTS crop classifier.

Records evaluation runs (folds, seed, inversion policy, zero-std policy) with
their accuracy, precision/recall and error-rate metrics, plus the full report
as a JSON artifact. Tracking is optional: without mlflow or a reachable
backend every call is a no-op after one warning.
"""
from __future__ import annotations

import json
import logging
import math
import os
import tempfile

try:
    import mlflow
except ImportError:  # requirements-mlflow.txt not installed
    mlflow = None

TRACKING_URI = os.getenv("MLFLOW_TRACKING_URI", "sqlite:///mlflow.db")
EXPERIMENT_NAME = "imts-crop-classifier"

log = logging.getLogger("tracker")

# Track whether MLflow is available (set on first connection attempt)
_mlflow_available: bool | None = None


def _ensure_experiment() -> str | None:
    """Create or get the MLflow experiment, return experiment ID or None if unavailable."""
    global _mlflow_available
    if _mlflow_available is False:
        return None
    if mlflow is None:
        _mlflow_available = False
        log.warning("mlflow is not installed, skipping tracking")
        return None
    try:
        mlflow.set_tracking_uri(TRACKING_URI)
        exp = mlflow.get_experiment_by_name(EXPERIMENT_NAME)
        _mlflow_available = True
        return exp.experiment_id if exp else mlflow.create_experiment(EXPERIMENT_NAME)
    except Exception as e:
        _mlflow_available = False
        log.warning("MLflow unavailable (%s), skipping tracking", type(e).__name__)
        return None


def evaluation_metrics(report: dict) -> dict[str, float]:
    """Flatten an EvaluationReport dict into MLflow metrics (NaN/None dropped)."""
    keys = ("accuracy", "precision_weighted", "recall_weighted", "precision_macro", "recall_macro",
            "mae", "rmse", "rae", "rrse")
    return {k: float(report[k]) for k in keys
            if report.get(k) is not None and math.isfinite(float(report[k]))}


def log_evaluation(report: dict, params: dict, run_name: str = "evaluate") -> bool:
    """Log one evaluation report; returns False when tracking is unavailable."""
    if _ensure_experiment() is None:
        return False
    mlflow.set_experiment(EXPERIMENT_NAME)
    with mlflow.start_run(run_name=run_name):
        mlflow.log_params({k: str(v) for k, v in params.items()})
        mlflow.log_metrics(evaluation_metrics(report))
        text = json.dumps(report, indent=2, ensure_ascii=False)
        try:
            mlflow.log_text(text, "report.json")
        except AttributeError:
            with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as f:
                f.write(text)
                tmp_path = f.name
            mlflow.log_artifact(tmp_path, artifact_path=".")
    return True
