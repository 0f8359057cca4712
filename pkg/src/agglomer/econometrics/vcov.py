"""Cluster-robust sandwich covariance (one-way and two-way CGM)."""

import numpy as np
import pandas as pd

from ..errors import TooFewClusters, ValidationError


def _bread_inv(fit):
    return np.linalg.pinv(fit.info)


def _meat(score_obs, codes):
    """Cluster-summed outer product with a G/(G-1) correction."""
    G = int(codes.max()) + 1
    if G < 2:
        raise TooFewClusters(f"need at least 2 clusters, got {G}")
    S = np.zeros((G, score_obs.shape[1]))
    np.add.at(S, codes, score_obs)
    return (S.T @ S) * (G / (G - 1.0))


def _sandwich(fit, codes):
    bread = _bread_inv(fit)
    return bread @ _meat(fit.score_obs, codes) @ bread


def robust_vcov(fit):
    """Heteroskedasticity-robust covariance (every row its own cluster)."""
    n = fit.score_obs.shape[0]
    return _sandwich(fit, np.arange(n))


def clustered_vcov(fit, cluster_names=None, mode=None):
    """Attach a cluster-robust covariance to a converged fit.

    One-way: standard sandwich with cluster-summed scores. Two-way:
    V_A + V_B - V_(A and B), each term with its own G/(G-1) correction;
    an indefinite combination is floored at zero eigenvalues and flagged.
    """
    ids = fit.design.cluster_ids
    if cluster_names is None:
        cluster_names = list(ids)
    if not cluster_names:
        raise ValidationError("no cluster factors available")
    for name in cluster_names:
        if name not in ids:
            raise ValidationError(f"unknown cluster factor {name!r}")
    if mode is None:
        mode = "twoway" if len(cluster_names) >= 2 else "oneway"

    if mode == "oneway":
        V = _sandwich(fit, ids[cluster_names[0]])
    elif mode == "twoway":
        if len(cluster_names) < 2:
            raise ValidationError("twoway clustering needs two cluster factors")
        a, b = cluster_names[:2]
        inter = pd.factorize(
            pd.Series(ids[a]).astype(str) + "\x1f" + pd.Series(ids[b]).astype(str),
            sort=True,
        )[0]
        V = _sandwich(fit, ids[a]) + _sandwich(fit, ids[b]) - _sandwich(fit, inter)
        eigval, eigvec = np.linalg.eigh((V + V.T) / 2.0)
        if eigval.min() < 0:
            V = (eigvec * np.maximum(eigval, 0.0)) @ eigvec.T
            fit.flags.append("vcov_eigenvalue_floored")
    else:
        raise ValidationError(f"unknown vcov mode {mode!r}")

    fit.vcov = (V + V.T) / 2.0
    fit.vcov_mode = mode
    return fit.vcov
