"""IMTS crop classifier: grey weights → ranking scores → least-MD classes.

Usage:
    python scripts/imts_cli.py weights   --data D.csv --hierarchy H.json [--dump-intermediates]
    python scripts/imts_cli.py aggregate --data D.csv --hierarchy H.json --weights out/weights.csv
    python scripts/imts_cli.py train     --scores out/ranking.csv [--policy pinv] [--zero-std drop]
    python scripts/imts_cli.py classify  --models out/models --scores new_sites.csv
    python scripts/imts_cli.py evaluate  --scores out/ranking.csv --folds 10 --seed 42 [--format table]
    python scripts/imts_cli.py pipeline  [--config config.yaml] [--folds 5 ...]
    python scripts/imts_cli.py reproduce all

Every command renders its artifacts in memory and writes them only when
the whole command succeeded. Exit codes: 0 ok, 1 reproduce mismatch,
2 config, 3 data validation, 4 numeric, 5 file I/O.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import pandas as pd

sys.path.insert(0, str(Path(__file__).resolve().parent))
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "skills" / "ml-experiment"))

from aggregate import align_weights, build_ranking_matrix, ranking_csv, read_ranking, read_weights, weights_frame
from artifacts import csv_text, json_text, write_all
from config import FORMATS, PipelineConfig, apply_overrides, load_config, parse_scale
from dataset import ID_COLUMN, LABEL_COLUMN, load_dataset
from errors import ConfigError, ImtsError
from grey import ConstantColumnPolicy, GreyAnalysis, GreyConfig, dataset_weights
from imts import (
    DEFAULT_RIDGE_EPSILON, InversionKind, InversionPolicy, ZeroStdPolicy, classify_scores, fit_models,
    model_filename, model_json, read_models,
)
from metrics import (
    EvaluationReport, classification_frame, comparison_frame, evaluate_predictions, kfold_evaluate,
    predictions_frame, read_imported, report_csv, report_table, resubstitution_evaluate,
)
from reproduce import TABLES, reproduce
from tracker import log_evaluation

log = logging.getLogger("imts")

REPORT_SUFFIX = {"csv": "csv", "json": "json", "table": "txt"}


# ── Helpers ──────────────────────────────────────────────────────────

@contextmanager
def stage(name: str):
    """Tag any ImtsError raised inside with the pipeline stage name."""
    try:
        yield
    except ImtsError as e:
        if not getattr(e, "stage", ""):
            e.stage = name
        raise


def _output_dir(args) -> Path:
    return Path(args.output_dir or os.getenv("IMTS_OUTPUT_DIR") or "out")


def _policy(args) -> InversionPolicy:
    return InversionPolicy.parse(args.policy, args.ridge_epsilon)


def _load(args):
    return load_dataset(args.data, args.hierarchy, label_column=None if args.no_labels else args.label_column,
                        id_column=args.id_column)


def _grey_artifacts(out: Path, analyses: dict[str, GreyAnalysis]) -> dict[Path, str]:
    files = {}
    for mf, a in analyses.items():
        for name, matrix in (("comparability", a.comparability), ("delta", a.delta),
                             ("coefficient", a.coefficients)):
            frame = _labelled(matrix.values, matrix.sub_factor_ids, matrix.alternative_ids)
            files[out / "grey" / f"{mf}_{name}.csv"] = csv_text(frame)
    return files


def _labelled(values, columns, ids) -> pd.DataFrame:
    frame = pd.DataFrame(values, columns=list(columns))
    frame.insert(0, ID_COLUMN, list(ids))
    return frame


def _model_artifacts(out: Path, models) -> dict[Path, str]:
    return {out / "models" / model_filename(i, m.class_name, len(models)): model_json(m)
            for i, m in enumerate(models, 1)}


def _report_artifact(out: Path, reports: dict[str, EvaluationReport], fmt: str) -> dict[Path, str]:
    path = out / f"report.{REPORT_SUFFIX[fmt]}"
    if fmt == "json":
        return {path: json_text({k: r.to_dict() for k, r in reports.items()})}
    if fmt == "csv":
        return {path: report_csv(reports)}
    return {path: report_table(reports)}


def _track(reports: dict[str, EvaluationReport], params: dict) -> None:
    for section, r in reports.items():
        log_evaluation(r.to_dict(), {**params, "section": section}, run_name=f"{r.classifier}-{section}")


def _commit(files: dict[Path, str]) -> None:
    for path in write_all(files):
        log.info("wrote %s", path)


# ── Commands ─────────────────────────────────────────────────────────

def cmd_weights(args) -> int:
    out = _output_dir(args)
    ds = _load(args)
    analyses = dataset_weights(ds, GreyConfig(args.threshold, args.constant_column))
    files = {out / "weights.csv": csv_text(weights_frame({k: a.weights for k, a in analyses.items()}))}
    if args.dump_intermediates:
        files.update(_grey_artifacts(out, analyses))
    _commit(files)
    return 0


def cmd_aggregate(args) -> int:
    ds = _load(args)
    weight_sets = align_weights(read_weights(args.weights), ds)
    scores = build_ranking_matrix(ds, weight_sets, parse_scale(args.scale))
    _commit({_output_dir(args) / "ranking.csv": ranking_csv(scores)})
    return 0


def cmd_train(args) -> int:
    scores = read_ranking(args.scores)
    models = fit_models(scores, _policy(args), ZeroStdPolicy(args.zero_std))
    _commit(_model_artifacts(_output_dir(args), models))
    return 0


def cmd_classify(args) -> int:
    models = read_models(args.models)
    scores = read_ranking(args.scores, labeled=False, feature_ids=models[0].feature_ids if models else None)
    results = classify_scores(models, scores)
    frame = classification_frame(results, [m.class_name for m in models])
    _commit({_output_dir(args) / "predictions.csv": csv_text(frame)})
    return 0


def cmd_evaluate(args) -> int:
    out = _output_dir(args)
    scores = read_ranking(args.scores)
    imports, names = args.imports or [], args.names or []
    if names and len(names) != len(imports):
        raise ConfigError("BAD_IMPORT", f"{len(imports)} --import file(s) but {len(names)} --name(s)", "--name")
    policy, zero_std = _policy(args), ZeroStdPolicy(args.zero_std)
    cv = kfold_evaluate(scores, args.folds, args.seed, policy, zero_std)
    reports = {"cross_validation": cv.report}
    if args.resubstitution:
        reports["resubstitution"], _ = resubstitution_evaluate(scores, policy, zero_std)
    files = {out / "cv_predictions.csv": csv_text(predictions_frame(cv.predictions, scores.class_names))}
    if imports:
        compared = [cv.report]
        for i, path in enumerate(imports):
            name = names[i] if names else Path(path).stem
            truth, predicted, probs = read_imported(path, scores)
            compared.append(evaluate_predictions(truth, predicted, scores.class_names, probs, classifier=name))
        files[out / "comparison.csv"] = csv_text(comparison_frame(compared))
    files.update(_report_artifact(out, reports, args.format))
    _commit(files)
    print(report_table(reports), end="")
    if args.track:
        _track(reports, {"folds": args.folds, "seed": args.seed, "policy": str(policy), "zero_std": zero_std.value})
    return 0


def run_pipeline(cfg: PipelineConfig) -> dict[Path, str]:
    """All pipeline artifacts, rendered but not written."""
    out = cfg.output_dir
    with stage("load"):
        ds = load_dataset(cfg.dataset_path, cfg.hierarchy_path, label_column=cfg.label_column, id_column=cfg.id_column)
    with stage("weights"):
        weight_sets = {k: a.weights for k, a in dataset_weights(ds, cfg.grey).items()}
    with stage("aggregate"):
        scores = build_ranking_matrix(ds, weight_sets, cfg.passthrough_scale)
    with stage("train"):
        models = fit_models(scores, cfg.policy, cfg.zero_std_policy)
    with stage("classify"):
        results = classify_scores(models, scores)
    with stage("evaluate"):
        resub = evaluate_predictions(scores.labels, [r.predicted for r in results], scores.class_names,
                                     classifier="IMTS")
        cv = kfold_evaluate(scores, cfg.folds, cfg.seed, cfg.policy, cfg.zero_std_policy)
    reports = {"resubstitution": resub, "cross_validation": cv.report}
    files = {
        out / "weights.csv": csv_text(weights_frame(weight_sets)),
        out / "ranking.csv": ranking_csv(scores),
        out / "predictions.csv": csv_text(classification_frame(results, scores.class_names)),
        out / "cv_predictions.csv": csv_text(predictions_frame(cv.predictions, scores.class_names)),
        **_model_artifacts(out, models),
        **_report_artifact(out, reports, cfg.format),
    }
    if cfg.track:
        _track(reports, cfg.params())
    return files


def cmd_pipeline(args) -> int:
    cfg = load_config(args.config)
    cfg = apply_overrides(
        cfg,
        dataset_path=args.data, hierarchy_path=args.hierarchy, label_column=args.label_column,
        id_column=args.id_column, threshold=args.threshold, constant_column_policy=args.constant_column,
        inversion_policy=args.policy, ridge_epsilon=args.ridge_epsilon, zero_std=args.zero_std,
        folds=args.folds, seed=args.seed, passthrough_scale=parse_scale(args.scale),
        output_dir=args.output_dir, format=args.format, track=True if args.track else None,
    )
    files = run_pipeline(cfg)
    with stage("write"):
        _commit(files)
    return 0


def cmd_reproduce(args) -> int:
    checks = reproduce(args.table)
    print("\n\n".join(c.render() for c in checks))
    failed = [c.table for c in checks if not c.passed]
    if failed:
        log.warning("FAIL: %s", ", ".join(failed))
    return 1 if failed else 0


# ── Argument parsing ─────────────────────────────────────────────────

def _policy_args(p: argparse.ArgumentParser, defaults: bool = True) -> None:
    p.add_argument("--policy", default="pinv" if defaults else None,
                   help=f"inversion policy: {', '.join(k.value for k in InversionKind)} (ridge:EPS accepted)")
    p.add_argument("--ridge-epsilon", type=float, default=DEFAULT_RIDGE_EPSILON if defaults else None)
    p.add_argument("--zero-std", choices=[z.value for z in ZeroStdPolicy],
                   default=ZeroStdPolicy.ERROR.value if defaults else None,
                   help="feature constant within a class: fail, or drop it from that class model")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", help="artifact directory (default $IMTS_OUTPUT_DIR or ./out)")
    common.add_argument("--debug", action="store_true", help="debug logging")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", required=True, help="dataset CSV")
    data.add_argument("--hierarchy", required=True, help="factor hierarchy JSON")
    data.add_argument("--label-column", default=LABEL_COLUMN)
    data.add_argument("--id-column", default=ID_COLUMN)
    data.add_argument("--no-labels", action="store_true", help="dataset has no label column")

    parser = argparse.ArgumentParser(description="Improved Mahalanobis-Taguchi crop classifier")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("weights", parents=[common, data], help="grey correlation sub-factor weights")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--constant-column", choices=[c.value for c in ConstantColumnPolicy],
                   default=ConstantColumnPolicy.ERROR.value)
    p.add_argument("--dump-intermediates", action="store_true",
                   help="also write grey/<mf>_{comparability,delta,coefficient}.csv")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("aggregate", parents=[common, data], help="objective-function ranking scores")
    p.add_argument("--weights", required=True, help="weights.csv from the weights command")
    p.add_argument("--scale", action="append", metavar="MF=VALUE", help="passthrough factor scale (repeatable)")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("train", parents=[common], help="fit one model per class")
    p.add_argument("--scores", required=True, help="labeled ranking-score CSV")
    _policy_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", parents=[common], help="least-MD classification")
    p.add_argument("--models", required=True, nargs="+", help="model directory and/or model JSON files")
    p.add_argument("--scores", required=True, help="ranking-score CSV (labels ignored)")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", parents=[common], help="k-fold cross-validated metrics")
    p.add_argument("--scores", required=True, help="labeled ranking-score CSV")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=42)
    _policy_args(p)
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.add_argument("--resubstitution", action="store_true", help="add a train-on-all / test-on-all section")
    p.add_argument("--import", dest="imports", action="append", metavar="FILE",
                   help="external predictions CSV (alternative_id, predicted[, prob_<class>...])")
    p.add_argument("--name", dest="names", action="append", help="classifier name for each --import")
    p.add_argument("--track", action="store_true", help="log the run to MLflow")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", parents=[common], help="weights → aggregate → train → classify → evaluate")
    p.add_argument("--config", help="config YAML/JSON (default $IMTS_CONFIG_YAML, config.yaml, config.example.yaml)")
    p.add_argument("--data")
    p.add_argument("--hierarchy")
    p.add_argument("--label-column")
    p.add_argument("--id-column")
    p.add_argument("--threshold", type=float)
    p.add_argument("--constant-column", choices=[c.value for c in ConstantColumnPolicy])
    _policy_args(p, defaults=False)
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", action="append", metavar="MF=VALUE")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--track", action="store_true")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("reproduce", parents=[common], help="recompute the published tables")
    p.add_argument("table", choices=[*TABLES, "all"])
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.debug else logging.INFO,
                        format="[%(name)s] %(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except ImtsError as e:
        print(f"error [{getattr(e, 'stage', '') or args.command}] {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
