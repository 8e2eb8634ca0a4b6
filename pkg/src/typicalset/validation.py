"""Input validation helpers shared by the core types and the estimator layer."""

from __future__ import annotations

import numpy as np

from .errors import DataError, ParameterError, ShapeError


def as_float_matrix(x, name: str) -> np.ndarray:
    """Coerce ``x`` to a 2-D float64 array, rejecting anything else."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be a 2-D array, got ndim={arr.ndim}")
    return arr


def as_float_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be a 1-D array, got ndim={arr.ndim}")
    return arr


def as_label_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be a 1-D array, got ndim={arr.ndim}")
    if not np.issubdtype(arr.dtype, np.integer):
        cast = arr.astype(np.int64)
        if not np.array_equal(cast, arr):
            raise DataError(f"{name} must contain integer class indices")
        arr = cast
    return arr.astype(np.int64)


def require_finite(arr: np.ndarray, name: str) -> None:
    """Raise :class:`DataError` naming the first non-finite entry, if any."""
    finite = np.isfinite(arr)
    if not finite.all():
        idx = int(np.flatnonzero(~finite.ravel())[0])
        raise DataError(f"{name} contains a non-finite value at flat index {idx}")


def require_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise ParameterError(f"{name} must be a positive finite real, got {value}")
    return value


def require_in_open_unit_interval(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ParameterError(f"{name} must lie in (0, 1), got {value}")
    return value


def frozen_copy(arr: np.ndarray) -> np.ndarray:
    """Return a read-only copy, so shared batches cannot be mutated in place."""
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out
