"""
Exception hierarchy shared by the library and the command-line harness.
"""


class PrivicError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PrivicError, ValueError):
    """An input violates the precondition of an operation."""


class CapabilityError(PrivicError):
    """The requested instance is larger than the desk-scale caps allow."""


class ConfigError(PrivicError):
    """The experiment configuration is invalid."""


class DataError(PrivicError):
    """A dataset could not be read."""
