"""Exception and warning types raised across the toolkit."""

from __future__ import annotations


class SpoofScoreError(Exception):
    """Base class for all toolkit errors."""


class DomainError(SpoofScoreError, ValueError):
    """A cost/prior parameter is outside its admissible domain."""

    def __init__(self, field: str, value, reason: str):
        self.field = field
        self.value = value
        super().__init__(f"{field}={value!r}: {reason}")


class JoinError(SpoofScoreError):
    """Scores and trial keys cannot be joined on trial_id."""

    def __init__(self, missing=(), duplicated=()):
        self.missing = list(missing)
        self.duplicated = list(duplicated)
        parts = []
        if self.missing:
            parts.append(_listing("missing from keys", self.missing))
        if self.duplicated:
            parts.append(_listing("duplicated in keys", self.duplicated))
        super().__init__("; ".join(parts) or "join failed")


def _listing(label: str, ids: list[str]) -> str:
    head = ", ".join(ids[:10])
    more = f" (+{len(ids) - 10} more)" if len(ids) > 10 else ""
    return f"{len(ids)} trial_id(s) {label}: {head}{more}"


class ParseError(SpoofScoreError):
    """A line of an input file could not be parsed."""

    def __init__(self, line: int, reason: str, path: str | None = None):
        self.line = line
        self.reason = reason
        self.path = path
        where = f"{path}:{line}" if path else f"line {line}"
        super().__init__(f"{where}: {reason}")


class FormatError(ParseError):
    """A line has the wrong number of columns."""


class VocabularyError(ParseError):
    """An attack/codec/class label is not in the configured vocabulary."""


class EmptyClassError(SpoofScoreError, ValueError):
    """A class bucket needed by a metric has no scores."""

    def __init__(self, bucket: str):
        self.bucket = bucket
        super().__init__(f"class bucket {bucket!r} is empty")


class DegenerateError(SpoofScoreError, ValueError):
    """Cost constants make a normalized metric undefined."""


class NoCrossingError(SpoofScoreError, ValueError):
    """The tandem spoof false-alarm path never meets the common error."""


class SpecError(SpoofScoreError, ValueError):
    """Invalid synthetic data description."""


class SeparableWarning(UserWarning):
    """Classes are perfectly separable; the affine scale was capped."""


class ConstantCalibrationWarning(UserWarning):
    """Scores carry no usable ordering; the affine map collapsed to a constant."""
