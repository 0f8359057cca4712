"""Pure-numpy implementations of the hot matrix kernels.

These are the fallback when the compiled extension is unavailable and the
reference the extension is tested against.
"""

import numpy as np

EARTH_RADIUS_KM = 6371.0088


def haversine_matrix(lat_deg, lon_deg):
    """Pairwise great-circle distances in km for arrays of coordinates."""
    lat = np.radians(np.asarray(lat_deg, dtype=np.float64))
    lon = np.radians(np.asarray(lon_deg, dtype=np.float64))
    dlat = lat[:, None] - lat[None, :]
    dlon = lon[:, None] - lon[None, :]
    a = np.sin(dlat / 2.0) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlon / 2.0) ** 2
    a = np.clip(a, 0.0, 1.0)
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(a))


def proximity_matrix(M):
    """Min-conditional-probability proximity of activity columns of a binary matrix.

    phi[k, k'] = sum_i M[i,k] M[i,k'] / max(ubiquity_k, ubiquity_k'),
    zero where both ubiquities are zero.
    """
    M = np.asarray(M, dtype=np.float64)
    co = M.T @ M
    ubiq = M.sum(axis=0)
    denom = np.maximum(ubiq[:, None], ubiq[None, :])
    phi = np.zeros_like(co)
    np.divide(co, denom, out=phi, where=denom > 0)
    return phi


def density_matrix(M, phi):
    """Relatedness density in percent for every (location, activity) pair.

    omega[i, k] = 100 * sum_k' M[i,k'] phi[k,k'] / sum_k' phi[k,k'],
    zero where an activity has no positive proximity to anything.
    """
    M = np.asarray(M, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    phi_tot = phi.sum(axis=1)
    num = M @ phi.T
    omega = np.zeros_like(num)
    np.divide(num, phi_tot[None, :], out=omega, where=phi_tot[None, :] > 0)
    return 100.0 * omega
