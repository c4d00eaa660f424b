"""Error families for the IMTS crop classifier.

Every failure carries a machine-readable code and a location (row, column,
fold, stage). The CLI maps each family to its exit status.
"""
from __future__ import annotations


class ImtsError(Exception):
    """Base error: ``code`` is stable, ``location`` says where it happened."""

    exit_code = 1

    def __init__(self, code: str, message: str, location: str = "") -> None:
        super().__init__(message)
        self.code = code
        self.message = message
        self.location = location

    def at(self, location: str) -> "ImtsError":
        """Prefix the location (e.g. with a fold index) and return self."""
        self.location = f"{location}, {self.location}" if self.location else location
        return self

    def __str__(self) -> str:
        where = f" at {self.location}" if self.location else ""
        return f"{self.code}{where}: {self.message}"


class ConfigError(ImtsError):
    exit_code = 2


class DataValidationError(ImtsError):
    exit_code = 3


class NumericError(ImtsError):
    exit_code = 4


class ArtifactIOError(ImtsError):
    exit_code = 5
