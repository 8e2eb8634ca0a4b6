"""Exception taxonomy.

Every error raised by this package derives from :class:`TypicalSetError` and
carries a short machine-parsable ``category`` used by the CLI to build its
``error[<category>]:`` prefixes.
"""

from __future__ import annotations


class TypicalSetError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"


class ShapeError(TypicalSetError):
    """Array dimensions are inconsistent with each other or with a contract."""

    category = "shape"


class ParameterError(TypicalSetError):
    """A scalar parameter is outside its documented domain."""

    category = "parameter"


class DataError(TypicalSetError):
    """Input data violates an invariant (non-finite values, bad labels, ...)."""

    category = "data"


class InsufficientDataError(DataError):
    """Too few samples for the requested estimate."""

    category = "data"


class StateError(TypicalSetError):
    """An operation was applied to a batch in the wrong activation stage."""

    category = "state"


class FitError(TypicalSetError):
    """Model fitting failed (e.g. singular covariance)."""

    category = "fit"


class DumpFormatError(TypicalSetError):
    """A feature-dump file is structurally invalid (magic, version, header)."""

    category = "format"

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DumpCorruptionError(DumpFormatError):
    """Declared and actual payload sizes disagree; no partial result is returned."""

    category = "corruption"
