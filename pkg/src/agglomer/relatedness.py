"""Activity proximity networks and relatedness densities."""

import numpy as np

from . import kernels


def proximity(M):
    """Proximity between activity columns of a binary specialization matrix.

    phi[k, k'] = co-occurrence / max(ubiquity_k, ubiquity_k'), i.e. the
    minimum of the two conditional specialization probabilities; 0 when
    both activities are absent everywhere.
    """
    return kernels.proximity_matrix(np.asarray(M, dtype=np.float64))


def relatedness_density(M, phi, exclude_self=False):
    """Relatedness density in percent for every (location, activity).

    The sum over neighboring activities includes the activity itself
    unless exclude_self is set. Activities with zero total proximity get
    density 0 (flagged via `isolated_activities`).
    """
    M = np.asarray(M, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if exclude_self:
        phi = phi.copy()
        np.fill_diagonal(phi, 0.0)
    return kernels.density_matrix(M, phi)


def isolated_activities(phi, exclude_self=False):
    """Boolean mask of activities whose proximity row sums to zero."""
    phi = np.asarray(phi, dtype=np.float64)
    if exclude_self:
        phi = phi.copy()
        np.fill_diagonal(phi, 0.0)
    return phi.sum(axis=1) == 0


def locals_proxy_fit(frame):
    """Validate birth/emigrant densities as a proxy for the density of
    strict locals (people born and died in the same region).

    `frame` needs columns omega_locals, omega_births, omega_emi, region,
    century. Returns the two slope estimates (region and century fixed
    effects partialled out via dummies) and the R-squared of fitted vs
    actual values.
    """
    from .econometrics import Covariate, RegressionSpec, build_design, fit_ols

    spec = RegressionSpec(
        family="gaussian",
        response="omega_locals",
        covariates=(Covariate("omega_births"), Covariate("omega_emi")),
        fixed_effects=(("region",), ("century",)),
        clusters=(),
    )
    design = build_design(frame, spec)
    fit = fit_ols(design)
    return {
        "alpha_births": fit.coef("omega_births"),
        "alpha_emi": fit.coef("omega_emi"),
        "r2": fit.r2,
        "fit": fit,
    }
