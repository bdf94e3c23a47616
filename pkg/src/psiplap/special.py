"""Gamma-function helpers used for the fractional kernel constants."""

from __future__ import annotations

import math

from .errors import NumericError


def gamma(x: float) -> float:
    """Gamma function with a finite-result guarantee.

    Backed by :func:`math.gamma` (a Lanczos approximation, relative error
    near machine precision on the positive reals used here).
    """
    try:
        value = math.gamma(x)
    except (ValueError, OverflowError) as exc:
        raise NumericError(f"gamma({x!r}) is not finite") from exc
    if not math.isfinite(value):
        raise NumericError(f"gamma({x!r}) is not finite")
    return value


def gamma_ratio(a: float, b: float) -> float:
    """Return Gamma(a) / Gamma(b) for positive arguments."""
    if a > 150.0 or b > 150.0:
        return math.exp(math.lgamma(a) - math.lgamma(b))
    return gamma(a) / gamma(b)
