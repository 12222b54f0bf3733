"""Small input-validation helpers shared across modules."""

import math
import numbers

import numpy as np

from .exceptions import EmptySampleError


def as_sample(x, name="x"):
    """Return ``x`` as a 1-d float64 array of finite values.

    Accepts a :class:`~cauchy_sketch.core.DiffSample`, any sequence or a
    numpy array. Raises ``EmptySampleError`` for zero-length input.
    """
    values = getattr(x, "x", x)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size == 0:
        raise EmptySampleError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_batch(X):
    """Return ``X`` as a 2-d float64 array (replicates x k)."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {arr.shape}")
    if arr.shape[1] == 0:
        raise EmptySampleError("samples have zero length")
    return arr


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_finite_real(value, name):
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    return value


def check_positive(value, name, exc=ValueError):
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise exc(f"{name} must be a positive finite real, got {value}")
    return value
