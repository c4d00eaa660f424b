"""Artifact I/O — fixed-precision CSV/JSON text and atomic file writes.

Artifacts are rendered to text first and written with temp file + rename,
so a failed run never leaves half-written files behind. Floats are printed
with 6 decimals; nothing time-dependent goes into an artifact.
"""
from __future__ import annotations

import io
import json
import math
import os
import tempfile
from pathlib import Path

import pandas as pd

from errors import ArtifactIOError, DataValidationError

FLOAT_FORMAT = "%.6f"
DECIMALS = 6


# ── Rendering ────────────────────────────────────────────────────────

def csv_text(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def rounded(obj):
    """Round every float in a JSON-like structure; NaN/inf become None."""
    if isinstance(obj, float):
        return round(obj, DECIMALS) if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    return obj


def json_text(obj, *, exact: bool = False) -> str:
    """JSON with 2-space indent; ``exact`` keeps full float precision."""
    return json.dumps(obj if exact else rounded(obj), indent=2, ensure_ascii=False) + "\n"


# ── Reading ──────────────────────────────────────────────────────────

def read_csv(path: str | Path, **kwargs) -> pd.DataFrame:
    """Read a CSV artifact; leading ``#`` lines are provenance comments.

    Only the comment block before the header is skipped, so a ``#`` inside
    a data cell is kept as text.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ArtifactIOError("FILE_NOT_FOUND", "no such file", str(path)) from e
    except UnicodeDecodeError as e:
        raise DataValidationError("BAD_ENCODING", f"not UTF-8 text ({e.reason} at byte {e.start})", str(path)) from e
    except OSError as e:
        raise ArtifactIOError("READ_FAILED", str(e), str(path)) from e
    lines = text.splitlines(keepends=True)
    start = 0
    while start < len(lines) and (lines[start].startswith("#") or not lines[start].strip()):
        start += 1
    try:
        return pd.read_csv(io.StringIO("".join(lines[start:])), skip_blank_lines=True, **kwargs)
    except pd.errors.EmptyDataError as e:
        raise DataValidationError("EMPTY_DATASET", "file has no header or rows", str(path)) from e
    except pd.errors.ParserError as e:
        raise DataValidationError("MALFORMED_CSV", str(e).strip(), str(path)) from e


def read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ArtifactIOError("FILE_NOT_FOUND", "no such file", str(path)) from e
    except OSError as e:
        raise ArtifactIOError("READ_FAILED", str(e), str(path)) from e


# ── Writing ──────────────────────────────────────────────────────────

def atomic_write(path: str | Path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temp file in the same directory."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(
            "w", dir=path.parent, prefix=f".{path.name}.", suffix=".tmp",
            delete=False, encoding="utf-8", newline="",
        ) as f:
            f.write(text)
            tmp_path = f.name
        os.replace(tmp_path, path)
    except OSError as e:
        raise ArtifactIOError("WRITE_FAILED", str(e), str(path)) from e
    return path


def write_all(artifacts: dict[Path, str]) -> list[Path]:
    """Commit a batch of rendered artifacts in a stable (sorted) order."""
    return [atomic_write(p, artifacts[p]) for p in sorted(artifacts)]
