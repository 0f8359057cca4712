"""Agglomeration analytics for biographic panels.

Builds century-by-century specialization matrices of famous births,
deaths and migrations, relatedness densities on the activity network,
spatial lags, entry/exit labels, and fixed-effects ML models with
cluster-robust inference.
"""

from . import (
    concentration,
    corpus,
    econometrics,
    kernels,
    pipeline,
    relatedness,
    spatial,
    specialization,
)
from .errors import AgglomerError, NonConvergence, ValidationError

__version__ = "0.1.0"

__all__ = [
    "concentration",
    "corpus",
    "econometrics",
    "kernels",
    "pipeline",
    "relatedness",
    "spatial",
    "specialization",
    "AgglomerError",
    "NonConvergence",
    "ValidationError",
    "__version__",
]
