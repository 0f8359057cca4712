"""Design-matrix construction: transforms, interactions, interacted fixed
effects, separation-dropping and collinearity pruning."""

import numpy as np
import pandas as pd
import scipy.linalg

from ..errors import RankDeficient, ValidationError
from .spec import covariate_name

# Columns whose absolute value never exceeds this after QR pivoting are
# treated as linearly dependent and dropped.
_RANK_TOL = 1e-9


class Design:
    """A materialized design matrix that can be re-assembled after
    counterfactual edits to covariate columns (for marginal effects)."""

    def __init__(self, spec, rows, y, cov_values, fe_names, fe_matrix, kept, names_all,
                 cluster_ids, n_dropped_na, n_dropped_separation):
        self.spec = spec
        self.rows = rows  # panel index of retained rows
        self.y = y
        self._cov_values = cov_values  # name -> 1d array, insertion-ordered
        self._fe_names = fe_names
        self._fe_matrix = fe_matrix  # (n, n_fe) float array
        self._kept = kept  # boolean mask over names_all
        self._names_all = names_all
        self.cluster_ids = cluster_ids  # name -> integer codes
        self.n_dropped_na = n_dropped_na
        self.n_dropped_separation = n_dropped_separation
        self.X = self._assemble(cov_values)
        self.names = [n for n, k in zip(names_all, kept) if k]

    @property
    def n(self):
        return len(self.y)

    def _assemble(self, cov_values):
        cols = [np.ones(len(self.rows))]
        for name in self._cov_values:
            cols.append(np.asarray(cov_values[name], dtype=np.float64))
        for a, b in self._inter_names():
            cols.append(np.asarray(cov_values[a]) * np.asarray(cov_values[b]))
        X = np.column_stack(cols)
        if self._fe_matrix.shape[1]:
            X = np.hstack([X, self._fe_matrix])
        return X[:, self._kept]

    def _inter_names(self):
        for a, b in self.spec.interactions:
            na = next(c.name for c in self.spec.covariates if c.col == a)
            nb = next(c.name for c in self.spec.covariates if c.col == b)
            yield na, nb

    def covariate_column(self, name):
        if name not in self._cov_values:
            raise ValidationError(f"{name!r} is not a covariate of this design")
        return self._cov_values[name].copy()

    def with_covariate(self, name, values):
        """Design matrix with one covariate column replaced (interactions
        involving it are recomputed); FE columns are untouched."""
        if name not in self._cov_values:
            raise ValidationError(f"{name!r} is not a covariate of this design")
        modified = dict(self._cov_values)
        modified[name] = np.asarray(values, dtype=np.float64)
        return self._assemble(modified)


def _fe_key_frame(panel, factors):
    """One string key column per interacted factor tuple."""
    keys = {}
    for factor in factors:
        name = "fe(" + "*".join(factor) + ")"
        parts = [panel[c].astype(str) for c in factor]
        key = parts[0]
        for p in parts[1:]:
            key = key + "\x1f" + p
        keys[name] = key
    return keys


def _drop_separated(y, fe_keys):
    """Iteratively remove rows in FE cells with a constant response.

    Returns a boolean keep-mask over the rows of y. Dropping rows can make
    another factor's cell constant, so passes repeat to a fixed point.
    """
    keep = np.ones(len(y), dtype=bool)
    changed = True
    while changed:
        changed = False
        for key in fe_keys.values():
            idx = np.flatnonzero(keep)
            if idx.size == 0:
                return keep
            codes = pd.factorize(key.iloc[idx].to_numpy())[0]
            ymax = np.full(codes.max() + 1, -np.inf)
            ymin = np.full(codes.max() + 1, np.inf)
            np.maximum.at(ymax, codes, y[idx])
            np.minimum.at(ymin, codes, y[idx])
            const = (ymax == ymin)[codes]
            if const.any():
                keep[idx[const]] = False
                changed = True
    return keep


def build_design(panel, spec):
    """Build the estimation design for a panel DataFrame.

    Rows with missing values in any referenced column are dropped first;
    for the logistic family, rows in FE cells whose response is constant
    are then dropped iteratively. One reference level is dropped per FE
    factor; remaining collinear columns are pruned by pivoted QR.
    """
    if len(panel) < 2:
        raise ValidationError("panel needs at least 2 rows")
    needed = [spec.response] + [c.col for c in spec.covariates]
    needed += [c for f in spec.fixed_effects for c in f]
    needed += list(spec.clusters)
    for col in needed:
        if col not in panel.columns:
            raise ValidationError(f"panel has no column {col!r}")
    sub = panel[list(dict.fromkeys(needed))].copy()

    usable = ~sub.isna().any(axis=1)
    # log of a nonpositive value is as unusable as a missing one
    for c in spec.covariates:
        if c.transform == "log":
            usable &= sub[c.col] > 0
    n_dropped_na = int((~usable).sum())
    sub = sub[usable]
    if len(sub) < 2:
        raise ValidationError("fewer than 2 usable rows after NA drop")

    y = sub[spec.response].to_numpy(dtype=np.float64)
    if spec.family == "logistic" and not np.isin(y, (0.0, 1.0)).all():
        raise ValidationError("logistic response must be binary 0/1")
    if spec.family == "negbin" and ((y < 0).any() or (y != np.round(y)).any()):
        raise ValidationError("negbin response must be nonnegative integers")

    fe_keys = _fe_key_frame(sub, spec.fixed_effects)
    n_dropped_separation = 0
    if spec.family == "logistic" and fe_keys:
        keep = _drop_separated(y, fe_keys)
        n_dropped_separation = int((~keep).sum())
        sub = sub.iloc[keep]
        y = y[keep]
        fe_keys = {name: key.iloc[keep] for name, key in fe_keys.items()}
        if len(sub) < 2:
            raise ValidationError("no variation left after separation-dropping")

    cov_values = {}
    for c in spec.covariates:
        cov_values[c.name] = c.apply(sub[c.col].to_numpy())

    inter_names = [
        f"{covariate_name(a, _transform_of(spec, a))}:"
        f"{covariate_name(b, _transform_of(spec, b))}"
        for a, b in spec.interactions
    ]

    fe_cols = []
    fe_names = []
    for name, key in fe_keys.items():
        levels = sorted(key.unique())
        for level in levels[1:]:  # first level is the reference
            fe_cols.append((key == level).to_numpy(dtype=np.float64))
            fe_names.append(f"{name}={level}")
    fe_matrix = (
        np.column_stack(fe_cols) if fe_cols else np.empty((len(sub), 0), dtype=np.float64)
    )

    names_all = ["(Intercept)"] + list(cov_values) + inter_names + fe_names
    X_full = np.column_stack(
        [np.ones(len(sub))]
        + [cov_values[n] for n in cov_values]
        + [
            cov_values[covariate_name(a, _transform_of(spec, a))]
            * cov_values[covariate_name(b, _transform_of(spec, b))]
            for a, b in spec.interactions
        ]
    )
    if fe_matrix.shape[1]:
        X_full = np.hstack([X_full, fe_matrix])

    kept = _independent_columns(X_full)
    n_cov = len(cov_values) + len(inter_names)
    if spec.covariates and not kept[1 : 1 + n_cov].any():
        raise RankDeficient("no identifiable non-FE coefficient in the design")

    cluster_ids = {
        c: pd.factorize(sub[c].astype(str), sort=True)[0] for c in spec.clusters
    }

    return Design(
        spec=spec,
        rows=sub.index.to_numpy(),
        y=y,
        cov_values=cov_values,
        fe_names=fe_names,
        fe_matrix=fe_matrix,
        kept=kept,
        names_all=names_all,
        cluster_ids=cluster_ids,
        n_dropped_na=n_dropped_na,
        n_dropped_separation=n_dropped_separation,
    )


def _transform_of(spec, col):
    return next(c.transform for c in spec.covariates if c.col == col)


def _independent_columns(X):
    """Boolean mask of a maximal linearly independent column subset.

    Earlier columns take precedence, so the intercept and covariates win
    over FE dummies. Fast path: one unpivoted QR when already full rank;
    otherwise a greedy Gram-Schmidt sweep in column order.
    """
    n, m = X.shape
    kept = np.zeros(m, dtype=bool)
    nonzero = np.flatnonzero((X != 0).any(axis=0))
    if nonzero.size == 0:
        raise RankDeficient("design matrix is entirely zero")
    Xn = X[:, nonzero] / np.linalg.norm(X[:, nonzero], axis=0)
    if Xn.shape[1] <= n:
        R = scipy.linalg.qr(Xn, mode="r")[0]
        diag = np.abs(np.diag(R))
        if diag.min() > _RANK_TOL:
            kept[nonzero] = True
            return kept
    Q = np.empty((Xn.shape[1], n))
    r = 0
    keep_local = []
    for j in range(Xn.shape[1]):
        v = Xn[:, j].copy()
        if r:
            for _ in range(2):  # one reorthogonalization pass for stability
                v -= Q[:r].T @ (Q[:r] @ v)
        norm = np.linalg.norm(v)
        if norm > _RANK_TOL:
            Q[r] = v / norm
            r += 1
            keep_local.append(j)
    kept[nonzero[keep_local]] = True
    return kept
