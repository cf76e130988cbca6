"""Exception hierarchy shared by every module."""


class HSCompressError(Exception):
    """Base class for all package errors."""


class InputError(HSCompressError, ValueError):
    """Rejected input: bad letters, malformed points or spec strings."""


class DomainError(HSCompressError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(HSCompressError, ValueError):
    """Incompatible combination of spaces, embeddings or options."""


class CapacityError(HSCompressError, RuntimeError):
    """A computation would exceed a configured size cap."""

    def __init__(self, message, predicted=None, cap=None):
        super().__init__(message)
        self.predicted = predicted
        self.cap = cap


class OutOfRangeError(CapacityError):
    """A lookup needs a table built to a larger radius."""

    def __init__(self, message, required_radius=None, cap=None):
        super().__init__(message, predicted=required_radius, cap=cap)
        self.required_radius = required_radius


class EstimationError(HSCompressError, ValueError):
    """Not enough data to produce an estimate."""


class HypothesisError(HSCompressError, ValueError):
    """A growth hypothesis needed by an analytic bound fails on the data."""

    def __init__(self, message, r=None):
        super().__init__(message)
        self.r = r
