from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping


@dataclass(eq=False)
class LsmixError(Exception):
    """Base error for the project."""
    message: str = ""
    context: Mapping[str, Any] | None = None

    def __str__(self) -> str:
        if not self.context:
            return self.message or self.__class__.__name__
        return f"{self.message or self.__class__.__name__} | context={dict(self.context)}"


class InvalidParameterError(LsmixError):
    """Raised when a parameter lies outside its domain."""


class SiteError(LsmixError):
    """Raised when a site set is invalid (too few, duplicated, malformed)."""


class DataError(LsmixError):
    """Raised when observations are missing, malformed or degenerate."""


class NumericalError(LsmixError):
    """Raised when a factorization or quadrature fails beyond recovery."""


class ConvergenceError(LsmixError):
    """Raised when a sampler or a batch of fits fails its diagnostics."""


class ConfigError(LsmixError):
    """Raised when a run configuration is malformed or names unknown entries."""
