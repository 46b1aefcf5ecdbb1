"""Exception types raised across the package."""


class RVLError(Exception):
    """Base class for all errors raised by rvl."""


class DomainError(RVLError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SizeError(RVLError):
    """A construction would exceed a configured size cap."""

    def __init__(self, message, size=None):
        super().__init__(message)
        self.size = size


class OutOfRangeError(RVLError):
    """A query reaches beyond a precomputed table (e.g. the sieve limit)."""


class QuadratureError(RVLError):
    """Two quadrature refinement levels disagree beyond tolerance."""

    def __init__(self, message, coarse=None, fine=None):
        super().__init__(message)
        self.coarse = coarse
        self.fine = fine


class ConfigError(RVLError):
    """Malformed experiment configuration."""


class ImageOverflowError(RVLError, OverflowError):
    """Monomial images would not fit in signed 64-bit integers."""
