"""Expected counts, specialization ratios, binary matrices and nested sorting.

All operations act on a single (region x occupation) count matrix for one
century and mobility role, after sparse filtering.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMatrix, InconsistentExpectation


def expected_naive(N):
    """Margins-preserving expected counts: row_sum * col_sum / total."""
    N = np.asarray(N, dtype=np.float64)
    total = N.sum()
    if total <= 0:
        raise DegenerateMatrix("count matrix sums to zero")
    return np.outer(N.sum(axis=1), N.sum(axis=0)) / total


def rca_ratio(N, N_hat):
    """Elementwise observed/expected ratio with a 0/0 -> 0 guard."""
    N = np.asarray(N, dtype=np.float64)
    N_hat = np.asarray(N_hat, dtype=np.float64)
    if N.shape != N_hat.shape:
        raise ValueError("shape mismatch between observed and expected")
    if ((N_hat == 0) & (N > 0)).any():
        raise InconsistentExpectation("zero expectation with positive observed count")
    R = np.zeros_like(N)
    np.divide(N, N_hat, out=R, where=N_hat > 0)
    return R


def binarize(R):
    """Specialized iff the ratio reaches 1 (ties inclusive)."""
    return (np.asarray(R) >= 1.0).astype(np.int8)


def joint_ratio(N_births, N_deaths):
    """Ratio pooling births and deaths, each against its own naive expectation."""
    N_births = np.asarray(N_births, dtype=np.float64)
    N_deaths = np.asarray(N_deaths, dtype=np.float64)
    if N_deaths.sum() == 0:
        return rca_ratio(N_births, expected_naive(N_births))
    if N_births.sum() == 0:
        return rca_ratio(N_deaths, expected_naive(N_deaths))
    return rca_ratio(
        N_births + N_deaths, expected_naive(N_births) + expected_naive(N_deaths)
    )


def diversity(M):
    """Activities per location (row sums of M)."""
    return np.asarray(M).sum(axis=1)


def ubiquity(M):
    """Locations per activity (column sums of M)."""
    return np.asarray(M).sum(axis=0)


def nested_sort(M, region_codes, occupation_codes):
    """Row/column orders by descending diversity/ubiquity, ties lexicographic."""
    M = np.asarray(M)
    div = diversity(M)
    ubi = ubiquity(M)
    region_order = sorted(range(M.shape[0]), key=lambda i: (-div[i], region_codes[i]))
    occ_order = sorted(range(M.shape[1]), key=lambda k: (-ubi[k], occupation_codes[k]))
    return region_order, occ_order


@dataclass
class SpecializationSet:
    """Filtered counts, expectations, ratios and binary matrix for one slice."""

    role: str
    century: int
    regions: tuple
    occupations: tuple
    N: np.ndarray
    N_hat: np.ndarray
    R: np.ndarray = field(init=False)
    M: np.ndarray = field(init=False)

    def __post_init__(self):
        self.R = rca_ratio(self.N, self.N_hat)
        self.M = binarize(self.R)

    @property
    def diversity(self):
        return diversity(self.M)

    @property
    def ubiquity(self):
        return ubiquity(self.M)
