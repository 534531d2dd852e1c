"""Exception hierarchy shared by every module."""


class NoisyMapsError(Exception):
    """Base class for package errors."""


class DomainError(NoisyMapsError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class ResourceError(NoisyMapsError, RuntimeError):
    """A computation would exceed a configured size cap."""

    def __init__(self, message, size=None):
        super().__init__(message)
        self.size = size


class TruncationError(ResourceError):
    """A dependency cone reached a row that the descriptor does not simulate."""


class NotFoundError(NoisyMapsError, LookupError):
    """A search over a finite range came back empty."""


class SpecParseError(NoisyMapsError, ValueError):
    """Malformed descriptor or G-delta file."""

    def __init__(self, message, line=None, column=None, path=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}, column {column}")
        if path:
            loc.append(f"at {path}")
        super().__init__(f"{message} ({'; '.join(loc)})" if loc else message)
        self.line = line
        self.column = column
        self.path = path
