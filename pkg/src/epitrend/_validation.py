"""Input validation helpers for series-shaped arguments.

Estimators and library functions accept anything array-like; these helpers
normalise to a 1-D float array and fail early with a clear message.
"""

from __future__ import annotations

import numpy as np


def as_series(x, name: str = "x", allow_empty: bool = False) -> np.ndarray:
    """Coerce ``x`` to a contiguous 1-D float64 array.

    Accepts lists, tuples, 1-D arrays and single-column 2-D arrays (the
    sklearn ``(n_samples, 1)`` shape). NaN or infinite entries are rejected.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise ValueError(f"{name} must not be empty")
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or infinite values")
    return np.ascontiguousarray(arr)


def check_positive_int(value, name: str) -> int:
    if value != int(value) or int(value) < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_probability(value, name: str) -> float:
    v = float(value)
    if not 0.0 < v < 1.0:
        raise ValueError(f"{name} must lie strictly between 0 and 1, got {value!r}")
    return v
