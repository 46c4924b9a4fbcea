"""Exception hierarchy. Every data-level failure derives from ``SurprisalError``."""

from __future__ import annotations


class SurprisalError(ValueError):
    """Base class for data errors raised by this package."""


class TimelineError(SurprisalError):
    """A timeline is empty, malformed, or fails validation."""


class VocabularyMismatchError(SurprisalError):
    """A vector references feature ids outside the vocabulary it is paired with."""


class PolicyError(SurprisalError):
    """Invalid threshold policy parameters."""


class IngestError(SurprisalError):
    """A raw input could not be converted to a timeline.

    ``row`` and ``column`` locate the offending cell when known (row is the
    0-based data row, not counting the header).
    """

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class UndefinedAUCError(SurprisalError):
    """AUC requires both classes. The remaining metrics are kept on ``report``."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report
