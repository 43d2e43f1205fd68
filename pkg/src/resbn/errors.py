"""Exception hierarchy shared by all modules."""


class ResbnError(Exception):
    """Base class for every error raised by resbn."""


class ConfigError(ResbnError):
    """Invalid run configuration or call arguments.

    ``fields`` optionally lists ``{"field": ..., "message": ...}`` entries.
    """

    def __init__(self, message: str, fields: list[dict] | None = None):
        super().__init__(message)
        self.fields = list(fields or [])


class DataError(ResbnError):
    """Problem with input data: ingestion, transforms, label mapping."""


class DegenerateRangeError(DataError):
    """A variable's observed range is zero where a positive range is needed."""


class IncomparableError(ResbnError):
    """Two objects cannot be compared (no shared variables, different node sets)."""


class IllegalMoveError(ResbnError):
    """A structure edit would break acyclicity or is otherwise not allowed."""


class FitError(ResbnError):
    """Parameter fitting failed for a variable."""


class ModelFormatError(ResbnError):
    """A serialized model or bundle could not be loaded."""
