"""Small input-validation helpers used by the estimators."""

from __future__ import annotations

import numpy as np

__all__ = ["check_ternary_matrix", "check_labels", "check_matrix_labels"]


def check_ternary_matrix(X, n_features: int | None = None) -> np.ndarray:
    """Coerce ``X`` to a 2-D int8 array with values in {-1, 0, 1}."""
    X = np.asarray(X)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if X.size and not np.isin(X, (-1, 0, 1)).all():
        bad = X[~np.isin(X, (-1, 0, 1))].flat[0]
        raise ValueError(f"feature values must be in {{-1, 0, 1}}, found {bad!r}")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(
            f"feature matrix has {X.shape[1]} columns, expected {n_features}"
        )
    return X.astype(np.int8, copy=False)


def check_labels(y, n_samples: int | None = None) -> np.ndarray:
    """Coerce ``y`` to a 1-D integer label array."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"expected a 1-D label array, got shape {y.shape}")
    if n_samples is not None and y.shape[0] != n_samples:
        raise ValueError(f"got {y.shape[0]} labels for {n_samples} samples")
    if y.size and not np.issubdtype(y.dtype, np.integer):
        if not np.all(y == y.astype(np.int64)):
            raise ValueError("labels must be integers")
    return y.astype(np.int64, copy=False)


def check_matrix_labels(X, y, n_features: int | None = None):
    X = check_ternary_matrix(X, n_features=n_features)
    y = check_labels(y, n_samples=X.shape[0])
    return X, y
