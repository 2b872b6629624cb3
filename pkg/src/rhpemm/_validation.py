"""Input validation helpers shared across the package."""

import numbers

import numpy as np


class OracleError(ValueError):
    """An oracle returned a non-finite value or a badly shaped array."""


def check_vector(a, size=None, name="array"):
    """Return ``a`` as a finite 1-d float array, optionally of length ``size``."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-d, got shape {arr.shape}")
    if size is not None and arr.shape[0] != size:
        raise ValueError(f"{name} must have length {size}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_matrix(a, shape=None, name="matrix"):
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-d, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_scalar(x, name, *, min_val=None, max_val=None,
                 include_min=True, include_max=True):
    """Validate a real scalar against an (open or closed) interval."""
    if not isinstance(x, numbers.Real) or isinstance(x, bool):
        raise TypeError(f"{name} must be a real number, got {type(x).__name__}")
    x = float(x)
    if not np.isfinite(x):
        raise ValueError(f"{name} must be finite, got {x}")
    if min_val is not None:
        if (include_min and x < min_val) or (not include_min and x <= min_val):
            bracket = "[" if include_min else "("
            raise ValueError(f"{name} must lie in {bracket}{min_val}, ...), got {x}")
    if max_val is not None:
        if (include_max and x > max_val) or (not include_max and x >= max_val):
            bracket = "]" if include_max else ")"
            raise ValueError(f"{name} must lie in (..., {max_val}{bracket}, got {x}")
    return x


def check_nonnegative(y, name="y"):
    if np.any(y < 0):
        raise ValueError(f"{name} must be componentwise nonnegative, min entry {y.min()}")
    return y


def check_finite(value, what):
    """Raise :class:`OracleError` unless every entry of ``value`` is finite."""
    if not np.all(np.isfinite(value)):
        raise OracleError(f"oracle returned non-finite {what}")
    return value


def check_random_state(seed):
    """Turn ``seed`` into a :class:`numpy.random.Generator`."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
