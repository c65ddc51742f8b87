"""Small input-validation helpers used across modules."""

from __future__ import annotations

from .errors import ConfigurationError, DimensionError, StateError


def check_fraction(name: str, value: float) -> float:
    if not 0.0 < value < 1.0:
        raise ConfigurationError(f"{name} must lie strictly between 0 and 1, got {value!r}")
    return float(value)


def check_positive(name: str, value: float) -> float:
    if not value > 0:
        raise ConfigurationError(f"{name} must be positive, got {value!r}")
    return float(value)


def check_int_at_least(name: str, value: int, minimum: int) -> int:
    if int(value) != value or value < minimum:
        raise ConfigurationError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_fitted(obj, attr: str) -> None:
    if getattr(obj, attr, None) is None:
        raise StateError(f"{type(obj).__name__} is not fitted; call fit() first")


def check_feature_indices(features, dimensionality: int) -> None:
    for idx in features:
        if not 0 <= idx < dimensionality:
            raise DimensionError(
                f"feature index {idx} outside dimensionality {dimensionality}"
            )
