"""Small numeric helpers used across modules."""

import numpy as np

from .errors import NumericalError, ShapeMismatchError


def as_float_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def check_finite(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name} contains non-finite entries")
    return arr


def check_shape(name: str, arr: np.ndarray, shape: tuple) -> np.ndarray:
    if tuple(arr.shape) != tuple(shape):
        raise ShapeMismatchError(f"{name} has shape {tuple(arr.shape)}, expected {tuple(shape)}")
    return arr


def readonly(arr: np.ndarray) -> np.ndarray:
    """Own a contiguous float64 copy and mark it read-only."""
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out is arr:
        out = out.copy()
    out.setflags(write=False)
    return out
