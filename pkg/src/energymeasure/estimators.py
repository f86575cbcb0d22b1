"""Estimator-style wrappers: configure with constructor parameters, ``fit`` on a measure or field."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import measures
from ._validation import check_field, check_measure, check_points, check_radius_ladder


class LocalDimensionEstimator(BaseEstimator, TransformerMixin):
    """Lower local dimension and upper ``s``-density at query points.

    ``fit(m)`` stores the measure; ``transform(X)`` returns one row per point:
    the dimension estimate, then the upper density when ``s`` is set.
    """

    def __init__(self, radii: Sequence[float] = (), s: Optional[float] = None):
        self.radii = radii
        self.s = s

    def fit(self, X, y=None):
        self.measure_ = check_measure(X)
        self.radii_ = check_radius_ladder(self.radii, 6)
        return self

    def transform(self, X):
        check_is_fitted(self, "measure_")
        pts = check_points(X, self.measure_.n)
        cols = [[measures.lower_local_dimension(self.measure_, x, self.radii_) for x in pts]]
        if self.s is not None:
            cols.append([measures.upper_s_density(self.measure_, x, self.s, self.radii_) for x in pts])
        return np.array(cols, dtype=float).T


class ConcentrationDimensionEstimator(BaseEstimator):
    def __init__(self, s_grid: Sequence[float] = tuple(np.linspace(0, 3, 61)), radii=None, tol: float = 0.01):
        self.s_grid = s_grid
        self.radii = radii
        self.tol = tol

    def fit(self, X, y=None):
        m = check_measure(X)
        self.report_ = measures.concentration_dim_report(m, self.s_grid, self.radii, tol=self.tol)
        self.dimension_ = self.report_.value
        return self


class EnergyMeasureEstimator(BaseEstimator):
    """``fit(field)`` builds the approximate energy measure; ``defect(field)`` decomposes against a slice."""

    def __init__(self, K: int = 4, limit=None, bumps=None):
        self.K = K
        self.limit = limit
        self.bumps = bumps

    def fit(self, X, y=None):
        f = check_field(X)
        self.approx_ = measures.build_energy_measure(f, self.K, self.limit, self.bumps)
        self.limit_ = self.approx_.limit
        return self

    def defect(self, field, k: int = -1) -> measures.DefectReport:
        check_is_fitted(self, "approx_")
        return measures.defect_decomposition(self.approx_, check_field(field), k)
