"""Exception types shared across the pipeline."""
from __future__ import annotations


class AdrMineError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(AdrMineError):
    """A value or configuration violates a documented invariant."""


class ParseError(AdrMineError):
    """A file could not be parsed; carries the file, line and column context."""

    def __init__(self, path: str, line: int, message: str, column: str | None = None):
        self.path = str(path)
        self.line = line
        self.column = column
        where = f"{self.path}:{line}"
        if column:
            where += f" (column {column!r})"
        super().__init__(f"{where}: {message}")


class FeatureExtractionError(AdrMineError):
    """A feature could not be computed for a pair (e.g. empty comparator group)."""


class StageError(AdrMineError):
    """A pipeline stage failed; carries the stage name and the underlying cause."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")
