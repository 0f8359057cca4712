from .design import Design, build_design
from .glm import FitResult, fit_logistic, fit_model, fit_negbin, fit_ols
from .margins import average_marginal_effects, counterfactual_count_ame
from .spec import Covariate, RegressionSpec
from .vcov import clustered_vcov, robust_vcov

__all__ = [
    "Design",
    "build_design",
    "FitResult",
    "fit_logistic",
    "fit_model",
    "fit_negbin",
    "fit_ols",
    "average_marginal_effects",
    "counterfactual_count_ame",
    "Covariate",
    "RegressionSpec",
    "clustered_vcov",
    "robust_vcov",
]
