# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot matrix kernels.

Loop-fused equivalents of agglomer.kernels._reference; same signatures,
same results up to floating-point summation order.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport asin, cos, sin, sqrt

cnp.import_array()

cdef double EARTH_RADIUS_KM = 6371.0088
cdef double DEG2RAD = 0.017453292519943295


def haversine_matrix(lat_deg, lon_deg):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lat = np.radians(
        np.ascontiguousarray(lat_deg, dtype=np.float64))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lon = np.radians(
        np.ascontiguousarray(lon_deg, dtype=np.float64))
    cdef Py_ssize_t n = lat.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, n), dtype=np.float64)
    cdef Py_ssize_t i, j
    cdef double sdlat, sdlon, a, d
    for i in range(n):
        for j in range(i + 1, n):
            sdlat = sin((lat[i] - lat[j]) / 2.0)
            sdlon = sin((lon[i] - lon[j]) / 2.0)
            a = sdlat * sdlat + cos(lat[i]) * cos(lat[j]) * sdlon * sdlon
            if a < 0.0:
                a = 0.0
            elif a > 1.0:
                a = 1.0
            d = 2.0 * EARTH_RADIUS_KM * asin(sqrt(a))
            out[i, j] = d
            out[j, i] = d
    return out


def proximity_matrix(M):
    # M is binary, so the co-occurrence counts only need the active cells
    # of each row; with typical densities well below 1 this beats a dense
    # M'M product.
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Mf = np.ascontiguousarray(M, dtype=np.float64)
    cdef Py_ssize_t n = Mf.shape[0], m = Mf.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ubiq = np.zeros(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] co = np.zeros((m, m), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] phi = np.zeros((m, m), dtype=np.float64)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] active = np.zeros(m, dtype=np.intp)
    cdef Py_ssize_t i, k, kp, a, b, d
    cdef double denom
    for i in range(n):
        d = 0
        for k in range(m):
            if Mf[i, k] != 0.0:
                active[d] = k
                d += 1
                ubiq[k] += 1.0
        for a in range(d):
            k = active[a]
            for b in range(a, d):
                co[k, active[b]] += 1.0
    for k in range(m):
        for kp in range(k, m):
            denom = ubiq[k] if ubiq[k] > ubiq[kp] else ubiq[kp]
            if denom > 0.0:
                phi[k, kp] = co[k, kp] / denom
                phi[kp, k] = phi[k, kp]
    return phi


def density_matrix(M, phi):
    # omega[i, k] = 100 * sum_kp M[i, kp] * phi[k, kp] / sum_kp phi[k, kp];
    # the numerator accumulates whole phi columns for the active kp only.
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Mf = np.ascontiguousarray(M, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] phT = np.ascontiguousarray(
        np.asarray(phi, dtype=np.float64).T)
    cdef Py_ssize_t n = Mf.shape[0], m = Mf.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] phi_tot = np.zeros(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] omega = np.zeros((n, m), dtype=np.float64)
    cdef Py_ssize_t i, k, kp
    for k in range(m):
        for kp in range(m):
            phi_tot[k] += phT[kp, k]
    for i in range(n):
        for kp in range(m):
            if Mf[i, kp] != 0.0:
                for k in range(m):
                    omega[i, k] += phT[kp, k]
        for k in range(m):
            if phi_tot[k] > 0.0:
                omega[i, k] = 100.0 * omega[i, k] / phi_tot[k]
            else:
                omega[i, k] = 0.0
    return omega
