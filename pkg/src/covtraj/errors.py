"""Exception types shared across the package."""

from __future__ import annotations


class CovtrajError(Exception):
    """Base class for all package-specific errors."""


class NumericalError(CovtrajError):
    """An iteration or integration failed to reach its tolerance."""


class ConfigError(CovtrajError):
    """A scenario configuration is malformed or physically inconsistent.

    Carries the dotted path of the offending field when known.
    """

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
