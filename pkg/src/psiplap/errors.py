"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class PsiPlapError(Exception):
    """Base class for all errors raised by :mod:`psiplap`."""


class DomainError(PsiPlapError, ValueError):
    """A point lies outside the domain of a coordinate map."""


class InvalidMapError(PsiPlapError, ValueError):
    """A coordinate map is not increasing, not invertible or has psi' <= 0."""


class GridError(PsiPlapError, ValueError):
    """Grid functions live on different grids, or a grid is too coarse."""


class ParameterError(PsiPlapError, ValueError):
    """A numerical parameter (order, exponent, tolerance) is out of range."""


class BoundaryError(PsiPlapError, ValueError):
    """A function that must vanish on the boundary does not."""

    def __init__(self, message: str, left: float = float("nan"), right: float = float("nan")):
        super().__init__(f"{message} (phi(0)={left!r}, phi(T)={right!r})")
        self.left = left
        self.right = right


class NumericError(PsiPlapError, ArithmeticError):
    """A computation produced a non-finite value or failed to converge."""


class DegenerateInputError(PsiPlapError, ValueError):
    """The input makes a quantity undefined, e.g. a zero denominator."""


class ConfigError(PsiPlapError, ValueError):
    """A run configuration is malformed, incomplete or inconsistent."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key
