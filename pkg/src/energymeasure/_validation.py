"""Input checks shared by the estimator wrappers and the command line."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .fieldio import SampledField, SampledMeasure


def check_field(obj) -> SampledField:
    if not isinstance(obj, SampledField):
        raise TypeError(f"expected a SampledField, got {type(obj).__name__}")
    return obj


def check_measure(obj) -> SampledMeasure:
    if not isinstance(obj, SampledMeasure):
        raise TypeError(f"expected a SampledMeasure, got {type(obj).__name__}")
    return obj


def check_points(X, n: int) -> np.ndarray:
    """2D float array of points with ``n`` columns."""
    X = check_array(np.atleast_2d(X), dtype=float)
    if X.shape[1] != n:
        raise ValueError(f"points have {X.shape[1]} coordinates, expected {n}")
    return X


def check_radius_ladder(radii, min_levels: int = 2) -> np.ndarray:
    r = check_array(np.asarray(radii, dtype=float).reshape(1, -1), dtype=float).ravel()
    if r.size < min_levels:
        raise ValueError(f"need at least {min_levels} radii")
    if np.any(r <= 0) or np.any(np.diff(r) >= 0):
        raise ValueError("radii must be positive and strictly decreasing")
    return r


def dyadic_ladder(R: float, levels: int) -> np.ndarray:
    if not R > 0 or levels < 1:
        raise ValueError("need R > 0 and at least one level")
    return R / 2.0 ** np.arange(levels)
