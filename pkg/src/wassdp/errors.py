"""Exception hierarchy shared by all modules."""


class WassDPError(Exception):
    pass


class ParameterError(WassDPError, ValueError):
    """An argument is outside its allowed range."""


class DomainMismatchError(WassDPError, ValueError):
    """Samples or distributions do not live on the expected domain."""


class MetricError(WassDPError, ValueError):
    """A distance matrix violates the metric axioms."""


class SizeError(WassDPError, ValueError):
    """An exact computation was requested on an instance that is too large."""


class InputFormatError(WassDPError):
    """A file could not be parsed. Carries the offending path and line."""

    def __init__(self, path, line, message):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")
