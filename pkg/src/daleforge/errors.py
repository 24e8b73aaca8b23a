"""Exception hierarchy shared by all daleforge modules."""

from __future__ import annotations


class DaleForgeError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(DaleForgeError, ValueError):
    pass


class DegenerateInput(DaleForgeError, ValueError):
    """Input is well-formed but makes the computation undefined (e.g. division by zero)."""


class InsufficientData(DaleForgeError, ValueError):
    pass


class UndefinedCorrelation(DegenerateInput):
    pass


class IntegrityError(DaleForgeError):
    """A received packet failed its checksum."""


class ManchesterError(DaleForgeError):
    """A received packet contained an invalid Manchester symbol pair."""


class ParseError(DaleForgeError, ValueError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{where}{message}")


class ConsistencyError(DaleForgeError, ValueError):
    """Files inside one house directory disagree with each other."""


class CalibrationMissing(DaleForgeError):
    pass
