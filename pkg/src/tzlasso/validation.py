"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


class ValidationError(ValueError):
    """Malformed user input (wrong shape, non-finite, unusable column)."""


def check_design(X, name: str = "X") -> np.ndarray:
    """Validate a design matrix: 2-D, finite, no all-zero column."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError(f"{name} must be 2-dimensional, got ndim={X.ndim}")
    n, p = X.shape
    if n < 1 or p < 1:
        raise ValidationError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(X)):
        raise ValidationError(f"{name} contains non-finite entries")
    zero_cols = np.flatnonzero(~np.any(X != 0.0, axis=0))
    if zero_cols.size:
        raise ValidationError(
            f"{name} has all-zero column(s) {zero_cols.tolist()}; "
            "their coefficients are unidentifiable"
        )
    return X


def check_response(y, n_expected: int | None = None, name: str = "y") -> np.ndarray:
    """Validate a response vector: 1-D, finite, length match."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        y = y.reshape(-1) if y.size == max(y.shape, default=0) else y
    if y.ndim != 1:
        raise ValidationError(f"{name} must be 1-dimensional")
    if not np.all(np.isfinite(y)):
        raise ValidationError(f"{name} contains non-finite entries")
    if n_expected is not None and y.shape[0] != n_expected:
        raise ValidationError(
            f"{name} has length {y.shape[0]}, expected {n_expected}"
        )
    return y


def check_pair(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = check_design(X)
    y = check_response(y, n_expected=X.shape[0])
    return X, y
