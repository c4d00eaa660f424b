"""PipelineConfig: the YAML/JSON document behind `imts_cli.py pipeline`.

Lookup order: --config PATH, $IMTS_CONFIG_YAML (the whole document inline),
config.yaml in the repo root, config.example.yaml. JSON is valid YAML, so
either syntax works. CLI flags override file values; $IMTS_OUTPUT_DIR
overrides output_dir unless --output-dir is given.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from artifacts import read_text
from dataset import ID_COLUMN, LABEL_COLUMN
from errors import ConfigError
from grey import ConstantColumnPolicy, GreyConfig
from imts import InversionPolicy, ZeroStdPolicy

ROOT_DIR = Path(__file__).resolve().parent.parent
CONFIG_PATH = ROOT_DIR / "config.yaml"
EXAMPLE_CONFIG_PATH = ROOT_DIR / "config.example.yaml"
FORMATS = ("csv", "json", "table")


@dataclass(frozen=True)
class PipelineConfig:
    dataset_path: Path
    hierarchy_path: Path
    label_column: str = LABEL_COLUMN
    id_column: str = ID_COLUMN
    threshold: float = 0.5
    constant_column_policy: str = ConstantColumnPolicy.ERROR.value
    inversion_policy: str = "pinv"
    ridge_epsilon: float = 1e-8
    zero_std: str = ZeroStdPolicy.ERROR.value
    folds: int = 10
    seed: int = 42
    passthrough_scale: dict[str, float] = field(default_factory=dict)
    output_dir: Path = Path("out")
    format: str = "json"
    track: bool = False

    @property
    def grey(self) -> GreyConfig:
        return GreyConfig(self.threshold, self.constant_column_policy)

    @property
    def policy(self) -> InversionPolicy:
        return InversionPolicy.parse(self.inversion_policy, self.ridge_epsilon)

    @property
    def zero_std_policy(self) -> ZeroStdPolicy:
        return ZeroStdPolicy(self.zero_std)

    def params(self) -> dict:
        """Evaluation parameters as recorded by the tracker."""
        return {"folds": self.folds, "seed": self.seed, "policy": str(self.policy), "zero_std": self.zero_std,
                "threshold": self.threshold}


# ── Loading ──────────────────────────────────────────────────────────

def _number(doc: dict, key: str, kind, default):
    value = doc.get(key, default)
    try:
        if isinstance(value, bool):
            raise TypeError(key)
        number = kind(value)
        if kind is int and isinstance(value, float) and number != value:
            raise ValueError(key)
        return number
    except (TypeError, ValueError) as e:
        raise ConfigError("BAD_VALUE", f"{key} must be {kind.__name__}, got {value!r}", key) from e


def config_from_dict(doc: dict, base_dir: Path = ROOT_DIR) -> PipelineConfig:
    """Build and validate a config; relative paths resolve against ``base_dir``."""
    if not isinstance(doc, dict):
        raise ConfigError("BAD_CONFIG", "config must be a mapping")
    for key in ("dataset", "hierarchy"):
        if not doc.get(key):
            raise ConfigError("MISSING_KEY", "required key is absent", key)
    grey = doc.get("grey") or {}
    scale = doc.get("passthrough_scale") or {}
    if not isinstance(scale, dict):
        raise ConfigError("BAD_VALUE", "passthrough_scale must be a mapping", "passthrough_scale")
    cfg = PipelineConfig(
        dataset_path=base_dir / str(doc["dataset"]),
        hierarchy_path=base_dir / str(doc["hierarchy"]),
        label_column=str(doc.get("label_column", LABEL_COLUMN)),
        id_column=str(doc.get("id_column", ID_COLUMN)),
        threshold=_number(grey, "threshold", float, 0.5),
        constant_column_policy=str(grey.get("constant_column_policy", ConstantColumnPolicy.ERROR.value)),
        inversion_policy=str(doc.get("inversion_policy", "pinv")),
        ridge_epsilon=_number(doc, "ridge_epsilon", float, 1e-8),
        zero_std=str(doc.get("zero_std", ZeroStdPolicy.ERROR.value)),
        folds=_number(doc, "folds", int, 10),
        seed=_number(doc, "seed", int, 42),
        passthrough_scale={str(k): _number(scale, k, float, None) for k in scale},
        output_dir=base_dir / str(doc.get("output_dir", "out")),
        format=str(doc.get("format", "json")),
        track=bool(doc.get("track", False)),
    )
    return validate_config(cfg)


def load_config(path: str | Path | None = None) -> PipelineConfig:
    if path is not None:
        path = Path(path)
        return config_from_dict(_parse(read_text(path), str(path)), path.resolve().parent)
    if os.getenv("IMTS_CONFIG_YAML"):
        return config_from_dict(_parse(os.environ["IMTS_CONFIG_YAML"], "IMTS_CONFIG_YAML"), ROOT_DIR)
    path = CONFIG_PATH if CONFIG_PATH.exists() else EXAMPLE_CONFIG_PATH
    return config_from_dict(_parse(read_text(path), str(path)), path.parent)


def _parse(text: str, source: str) -> dict:
    try:
        return yaml.safe_load(text) or {}
    except yaml.YAMLError as e:
        raise ConfigError("BAD_CONFIG", f"not valid YAML/JSON ({e})", source) from e


# ── Overrides and validation ─────────────────────────────────────────

def apply_overrides(cfg: PipelineConfig, **flags) -> PipelineConfig:
    """Replace fields with the flags that were given (None means not given)."""
    changes = {k: v for k, v in flags.items() if v is not None}
    if "output_dir" not in changes and os.getenv("IMTS_OUTPUT_DIR"):
        changes["output_dir"] = Path(os.environ["IMTS_OUTPUT_DIR"])
    if "passthrough_scale" in changes:
        changes["passthrough_scale"] = {**cfg.passthrough_scale, **changes["passthrough_scale"]}
    for key in ("dataset_path", "hierarchy_path", "output_dir"):
        if key in changes:
            changes[key] = Path(changes[key])
    return validate_config(dataclasses.replace(cfg, **changes))


def validate_config(cfg: PipelineConfig) -> PipelineConfig:
    if cfg.folds < 2:
        raise ConfigError("BAD_FOLDS", f"folds must be >= 2, got {cfg.folds}", "folds")
    if cfg.format not in FORMATS:
        raise ConfigError("BAD_FORMAT", f"format must be one of {', '.join(FORMATS)}", "format")
    try:
        ZeroStdPolicy(cfg.zero_std)
        ConstantColumnPolicy(cfg.constant_column_policy)
    except ValueError as e:
        raise ConfigError("BAD_POLICY", str(e), "config") from e
    bad = next((k for k, v in cfg.passthrough_scale.items() if not v > 0), None)
    if bad is not None:
        raise ConfigError("BAD_SCALE", f"scale must be > 0, got {cfg.passthrough_scale[bad]}", f"passthrough_scale.{bad}")
    _ = (cfg.grey, cfg.policy)  # both raise ConfigError when malformed
    return cfg


def parse_scale(items: list[str] | None) -> dict[str, float] | None:
    """``["mf3=0.5"]`` → ``{"mf3": 0.5}``."""
    if not items:
        return None
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        try:
            if not sep or not key:
                raise ValueError(item)
            out[key.strip()] = float(value)
        except ValueError as e:
            raise ConfigError("BAD_SCALE", f"expected MF=VALUE, got {item!r}", "--scale") from e
    return out
