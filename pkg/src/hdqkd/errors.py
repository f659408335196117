"""Exception hierarchy.

Every error raised by the library derives from :class:`HDQKDError`. The CLI
maps :class:`ConfigError` to exit code 1, :class:`DataError` to 2 and
:class:`InvariantViolation` to 3.
"""


class HDQKDError(Exception):
    """Base class for library errors."""


class ConfigError(HDQKDError, ValueError):
    """Invalid parameters or configuration."""


class InvalidDimensionError(ConfigError):
    pass


class DomainError(ConfigError):
    """A scalar argument is outside its admissible range."""


class PresetDimensionError(ConfigError):
    pass


class DataError(HDQKDError, ValueError):
    """Malformed or physically inconsistent input data."""


class EmptySubspaceError(DataError):
    pass


class MalformedTableError(DataError):
    pass


class IncompleteSettingError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class InconsistentDataError(DataError):
    """Inputs cannot come from any positive semidefinite matrix."""

    def __init__(self, message, triple=None):
        super().__init__(message)
        self.triple = triple


class PivotDegenerateError(DataError):
    pass


class SymmetryError(DataError):
    pass


class InfeasiblePointError(DataError):
    pass


class InvariantViolation(HDQKDError, RuntimeError):
    """An internal consistency check failed."""


class StageError(InvariantViolation):
    """Wraps a non-library exception raised inside a named pipeline stage."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
