"""Inverse-distance spatial weights and spatial lags."""

import numpy as np

from . import kernels
from .errors import IsolatedRegion

EARTH_RADIUS_KM = kernels.EARTH_RADIUS_KM

# Coincident distinct centroids would give infinite weight; distances are
# floored at this value (in km).
MIN_DISTANCE_KM = 1.0


def haversine_km(a, b):
    """Great-circle distance in km between two region records."""
    return float(
        kernels.haversine_matrix(
            np.array([a.centroid_lat, b.centroid_lat]),
            np.array([a.centroid_lon, b.centroid_lon]),
        )[0, 1]
    )


def weight_matrix(regions):
    """Symmetric inverse-distance weights with a zero diagonal."""
    lats = np.array([r.centroid_lat for r in regions], dtype=np.float64)
    lons = np.array([r.centroid_lon for r in regions], dtype=np.float64)
    d = kernels.haversine_matrix(lats, lons)
    np.fill_diagonal(d, np.inf)
    d = np.maximum(d, MIN_DISTANCE_KM)
    W = 1.0 / d
    np.fill_diagonal(W, 0.0)
    return W


def spatial_lag(W, values):
    """Weighted average of other regions' values: sum_i' W[i',i] v[i'] / sum_i' W[i',i].

    `values` may be a vector (one activity) or a (region x activity) matrix.
    """
    W = np.asarray(W, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    wsum = W.sum(axis=0)
    if (wsum == 0).any():
        raise IsolatedRegion("a region has zero total weight (single-region universe?)")
    return (W.T @ values) / (wsum[:, None] if values.ndim == 2 else wsum)


def spatial_lag_M(W, m_column):
    """Lag of a binary specialization column; lies in [0, 1]."""
    return spatial_lag(W, m_column)


def spatial_lag_omega(W, omega_column):
    """Lag of a relatedness-density column; lies within the neighbor range."""
    return spatial_lag(W, omega_column)
