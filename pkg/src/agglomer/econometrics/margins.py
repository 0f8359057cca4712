"""Average marginal effects and counterfactual re-predictions."""

import numpy as np

from ..errors import UnknownVariable, ValidationError
from .spec import TRANSFORMS


def _scale(fit):
    # probability differences are reported in percentage points
    return 100.0 if fit.family == "logistic" else 1.0


def _mean_prediction_diff(fit, X_alt, X_base=None):
    base = fit.predict() if X_base is None else fit.predict(X_base)
    return float((fit.predict(X_alt) - base).mean()) * _scale(fit)


def average_marginal_effects(fit, variable, kind="binary01"):
    """Mean over observations of the predicted-response change.

    binary01: variable switched 0 -> 1; sd_increase: + one in-sample
    standard deviation; unit: + 1. Interactions involving the variable are
    recomputed for both scenarios.
    """
    design = fit.design
    try:
        col = design.covariate_column(variable)
    except ValidationError:
        raise UnknownVariable(variable) from None
    if kind == "binary01":
        X0 = design.with_covariate(variable, np.zeros_like(col))
        X1 = design.with_covariate(variable, np.ones_like(col))
        return _mean_prediction_diff(fit, X1, X0)
    if kind == "sd_increase":
        delta = float(col.std(ddof=0))
    elif kind == "unit":
        delta = 1.0
    else:
        raise ValidationError(f"unknown marginal-effect kind {kind!r}")
    X_alt = design.with_covariate(variable, col + delta)
    return _mean_prediction_diff(fit, X_alt)


def counterfactual_count_ame(fit, raw_counts, variable, delta="+1"):
    """Re-predict after perturbing a raw count that enters transformed.

    `raw_counts` are the untransformed values aligned with the retained
    rows; delta is "+1" (one more unit) or "+1%" (relative increase),
    applied before the covariate's transform.
    """
    design = fit.design
    cov = next((c for c in design.spec.covariates if c.name == variable), None)
    if cov is None:
        raise UnknownVariable(variable)
    raw = np.asarray(raw_counts, dtype=np.float64)
    if raw.shape[0] != design.n:
        raise ValidationError("raw counts are not aligned with the design rows")
    if delta == "+1":
        perturbed = raw + 1.0
    elif delta == "+1%":
        perturbed = raw * 1.01
    else:
        raise ValidationError(f"unknown delta {delta!r}")
    X_alt = design.with_covariate(variable, TRANSFORMS[cov.transform](perturbed))
    X_base = design.with_covariate(variable, TRANSFORMS[cov.transform](raw))
    return _mean_prediction_diff(fit, X_alt, X_base)
