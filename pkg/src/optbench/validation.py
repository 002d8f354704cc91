"""Input validation helpers for the estimator API."""

from __future__ import annotations

import math

import numpy as np

from .errors import DataError, ShapeError


def ensure_image_batch(X, in_channels: int = 1) -> np.ndarray:
    """Coerce X to a float64 NCHW batch.

    Accepts (N, C, H, W), single-channel (N, H, W), or flat (N, D) rows
    where D is a perfect square (reshaped to square images).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        side = math.isqrt(X.shape[1])
        if side * side != X.shape[1]:
            raise ShapeError(
                f"flat rows of length {X.shape[1]} are not square images")
        X = X.reshape(len(X), 1, side, side)
    elif X.ndim == 3:
        X = X[:, None, :, :]
    elif X.ndim != 4:
        raise ShapeError(
            f"expected image batch with 2-4 axes, got shape {X.shape}")
    if X.shape[1] != in_channels:
        raise ShapeError(
            f"expected {in_channels} channel(s), got {X.shape[1]}")
    if len(X) == 0:
        raise DataError("empty input batch")
    if not np.isfinite(X).all():
        raise DataError("input batch contains non-finite values")
    return X


def ensure_labels(y, n: int | None = None) -> np.ndarray:
    """Coerce y to a 1-d integer label array, optionally of length n."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ShapeError(f"labels must be 1-d, got shape {y.shape}")
    if n is not None and len(y) != n:
        raise DataError(f"{n} samples but {len(y)} labels")
    if not np.issubdtype(y.dtype, np.integer):
        rounded = np.rint(np.asarray(y, dtype=np.float64))
        if not np.array_equal(rounded, np.asarray(y, dtype=np.float64)):
            raise DataError("labels must be integer-valued")
        y = rounded
    return y.astype(np.int64)
