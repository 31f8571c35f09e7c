"""Small input-validation helpers shared by the public functions.

They complement :mod:`sklearn.utils.validation` for the scalar and vector
arguments that scikit-learn does not cover, and raise :class:`InputError`
so callers get a single exception type for bad input.
"""

import math
from numbers import Integral, Real

import numpy as np

from ..exceptions import InputError


def check_vector(v, name="v", size=None):
    """Return ``v`` as a finite 1-d float array."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise InputError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or infinite values")
    if size is not None and arr.shape[0] != size:
        raise InputError(f"{name} has length {arr.shape[0]}, expected {size}")
    return arr


def check_matrix(X, name="X", n_features=None, allow_empty=False):
    """Return ``X`` as a finite 2-d float array (rows are samples)."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise InputError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not allow_empty and arr.shape[0] == 0:
        raise InputError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or infinite values")
    if n_features is not None and arr.shape[1] != n_features:
        raise InputError(f"{name} has {arr.shape[1]} columns, expected {n_features}")
    return arr


def check_open_unit(value, name):
    """Require ``0 < value < 1``."""
    if not isinstance(value, Real) or isinstance(value, bool) or not (0.0 < value < 1.0):
        raise InputError(f"{name} must lie in the open interval (0, 1), got {value!r}")
    return float(value)


def check_positive(value, name):
    if not isinstance(value, Real) or isinstance(value, bool) or not (value > 0) \
            or not math.isfinite(value):
        raise InputError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, Integral) or isinstance(value, bool) or value < minimum:
        raise InputError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
