from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "scripts"))
sys.path.insert(0, str(ROOT / "skills" / "ml-experiment"))

from aggregate import ranking_from_dataset  # noqa: E402
from dataset import load_dataset  # noqa: E402

FIXTURES = ROOT / "data" / "fixtures"
CLASSES = ("paddy", "sugarcane", "groundnut")


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def soil_dataset():
    """Table 1 comparability matrix, unlabeled, soil hierarchy."""
    return load_dataset(FIXTURES / "table1.csv", FIXTURES / "hierarchy_soil.json", label_column=None)


@pytest.fixture
def table6_dataset():
    return load_dataset(FIXTURES / "table6.csv", FIXTURES / "hierarchy_scores.json")


@pytest.fixture
def table6(table6_dataset):
    """Table 6 ranking scores as a labeled RankingScoreMatrix."""
    return ranking_from_dataset(table6_dataset)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def write_csv(path: Path, text: str) -> Path:
    path.write_text(text.strip() + "\n", encoding="utf-8")
    return path
