"""Input validation shared by the estimators and the command line."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .exceptions import DimensionMismatchError
from .tensor import Tensor3


def check_animation_tensor(x, min_vertices=1) -> np.ndarray:
    """Validate a ``K x 3 x F`` vertex tensor and return it as float64."""
    if isinstance(x, Tensor3):
        x = x.array
    arr = check_array(x, allow_nd=True, dtype=np.float64, ensure_2d=False,
                      ensure_all_finite=True, ensure_min_samples=min_vertices)
    if arr.ndim != 3:
        raise DimensionMismatchError("animation tensor must be 3-way", 3, arr.ndim)
    if arr.shape[1] != 3:
        raise DimensionMismatchError("mode 2 must hold x, y, z", 3, arr.shape[1])
    if arr.shape[2] < 1:
        raise DimensionMismatchError("animation needs at least one frame", ">= 1", arr.shape[2])
    return arr


def check_rank(value, upper, name) -> int:
    """Integer in ``[1, upper]``."""
    if isinstance(value, (bool, np.bool_)) or int(value) != value:
        raise ValueError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if not 1 <= value <= upper:
        raise ValueError(f"{name} = {value} outside [1, {upper}]")
    return value
