"""Spatial concentration of births and deaths: entropy and effective places."""

import numpy as np

from .errors import EmptyDistribution


def entropy(counts):
    """Shannon entropy in bits of a count vector; zero counts contribute 0."""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.min(initial=0.0) < 0:
        raise ValueError("counts must be nonnegative")
    total = counts.sum()
    if total <= 0:
        raise EmptyDistribution("all counts are zero")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def effective_places(h_bits):
    """Equivalent number of equally common places for entropy H: 2**H."""
    if h_bits < 0:
        raise ValueError("entropy must be nonnegative")
    return float(2.0**h_bits)


def concentration_series(corpus):
    """Per-century entropy and effective places of births and deaths.

    Computed on unfiltered counts aggregated over occupations; centuries
    with no births or no deaths are skipped.
    """
    rows = []
    for t in corpus.centuries_present():
        births = corpus.tensor.slice("births", t).sum(axis=1)
        deaths = corpus.tensor.slice("deaths", t).sum(axis=1)
        if births.sum() == 0 or deaths.sum() == 0:
            continue
        h_b = entropy(births)
        h_d = entropy(deaths)
        rows.append(
            {
                "century": t,
                "H_births": h_b,
                "E_births": effective_places(h_b),
                "H_deaths": h_d,
                "E_deaths": effective_places(h_d),
            }
        )
    return rows
