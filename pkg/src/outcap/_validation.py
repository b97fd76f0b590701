"""Argument checks shared across modules."""

from __future__ import annotations

import math
import numbers

from outcap.errors import DomainError


def check_finite(value, name: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")
    return value


def check_positive(value, name: str) -> float:
    value = check_finite(value, name)
    if value <= 0:
        raise DomainError(f"{name} must be positive, got {value}")
    return value


def check_nonnegative(value, name: str) -> float:
    value = check_finite(value, name)
    if value < 0:
        raise DomainError(f"{name} must be nonnegative, got {value}")
    return value


def check_probability(value, name: str = "eps") -> float:
    """Open-interval probability check, 0 < p < 1."""
    value = check_finite(value, name)
    if not 0.0 < value < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {value}")
    return value


def check_count(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise DomainError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")
    return value
