"""Maximum-likelihood fitting of logistic, NB2 negative-binomial and
Gaussian models on a built design."""

import numpy as np
import scipy.linalg
from scipy.special import digamma, expit, gammaln, polygamma, xlogy

from ..errors import NonConvergence, PerfectSeparation, RankDeficient

MAX_ITER = 100
SCORE_TOL = 1e-8
LL_REL_TOL = 1e-10

# NB2 dispersion above this is reported as the Poisson limit.
THETA_CAP = 1e8
THETA_POISSON_FLAG = 1e6


class FitResult:
    """Estimated coefficients plus everything needed for inference."""

    def __init__(self, design, family, beta, loglik, info, score_obs,
                 dispersion=None, dispersion_se=None, flags=()):
        self.design = design
        self.family = family
        self.names = list(design.names)
        self.beta = np.asarray(beta, dtype=np.float64)
        self.loglik = float(loglik)
        self.info = info  # observed/expected information for beta (bread)
        self.score_obs = score_obs  # per-observation score contributions (n x p)
        self.dispersion = dispersion
        self.dispersion_se = dispersion_se
        self.flags = list(flags)
        self.vcov = None  # filled by clustered_vcov / robust_vcov
        self.vcov_mode = None
        self.loglik_null = None
        self.pseudo_r2 = None
        self.aic = None
        self.bic = None
        self.r2 = None  # gaussian only

    @property
    def n_used(self):
        return self.design.n

    @property
    def n_dropped_separation(self):
        return self.design.n_dropped_separation

    @property
    def n_params(self):
        return len(self.beta) + (1 if self.family == "negbin" else 0)

    def coef(self, name):
        try:
            return float(self.beta[self.names.index(name)])
        except ValueError:
            raise KeyError(name) from None

    def se(self, name=None):
        if self.vcov is None:
            raise ValueError("no covariance computed yet")
        ses = np.sqrt(np.maximum(np.diag(self.vcov), 0.0))
        return ses if name is None else float(ses[self.names.index(name)])

    def predict(self, X=None):
        eta = (self.design.X if X is None else X) @ self.beta
        if self.family == "logistic":
            return expit(eta)
        if self.family == "negbin":
            return np.exp(eta)
        return eta

    def summary_dict(self):
        ses = self.se() if self.vcov is not None else [None] * len(self.beta)
        zs, ps = [], []
        for b, s in zip(self.beta, ses):
            if s is None or s == 0:
                zs.append(None)
                ps.append(None)
            else:
                z = b / s
                zs.append(z)
                ps.append(float(2.0 * _norm_sf(abs(z))))
        return {
            "family": self.family,
            "coefficients": [
                {
                    "name": n,
                    "estimate": float(b),
                    "se": None if s is None else float(s),
                    "z": zs[i],
                    "p": ps[i],
                    "stars": _stars(ps[i]),
                }
                for i, (n, b, s) in enumerate(zip(self.names, self.beta, ses))
            ],
            "loglik": self.loglik,
            "loglik_null": self.loglik_null,
            "pseudo_r2": self.pseudo_r2,
            "aic": self.aic,
            "bic": self.bic,
            "r2": self.r2,
            "dispersion": self.dispersion,
            "dispersion_se": self.dispersion_se,
            "n_used": self.n_used,
            "n_dropped_na": self.design.n_dropped_na,
            "n_dropped_separation": self.n_dropped_separation,
            "vcov_mode": self.vcov_mode,
            "flags": self.flags,
        }


def _norm_sf(z):
    from scipy.stats import norm

    return norm.sf(z)


def _stars(p):
    if p is None:
        return ""
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def _solve_spd(A, b):
    try:
        return scipy.linalg.solve(A, b, assume_a="pos")
    except scipy.linalg.LinAlgError:
        return np.linalg.lstsq(A, b, rcond=None)[0]


def _logistic_ll(y, eta):
    # y*eta - log(1 + exp(eta)), stable for large |eta|
    return float((y * eta - np.logaddexp(0.0, eta)).sum())


def fit_logistic(design, _null=True):
    """Newton/IRLS maximum likelihood for a binary response."""
    X, y = design.X, design.y
    beta = np.zeros(X.shape[1])
    ll_old = -np.inf
    ll = _logistic_ll(y, X @ beta)
    converged = False
    for _ in range(MAX_ITER):
        eta = X @ beta
        p = expit(eta)
        score = X.T @ (y - p)
        if np.abs(score).max() < SCORE_TOL:
            converged = True
            break
        if (p.max() > 1 - 1e-10 or p.min() < 1e-10) and np.abs(beta).max() > 1e3:
            raise PerfectSeparation(
                "fitted probabilities pinned at 0/1 with diverging coefficients"
            )
        w = p * (1.0 - p)
        A = (X * w[:, None]).T @ X
        step = _solve_spd(A, score)
        # halve the step until the likelihood does not decrease
        for _ in range(30):
            ll_new = _logistic_ll(y, X @ (beta + step))
            if ll_new >= ll - 1e-12:
                break
            step *= 0.5
        beta = beta + step
        ll_old, ll = ll, ll_new
        if abs(ll - ll_old) < LL_REL_TOL * (abs(ll) + 1e-12):
            converged = True
            break
    eta = X @ beta
    p = expit(eta)
    score = X.T @ (y - p)
    if not converged and np.abs(score).max() >= SCORE_TOL:
        raise NonConvergence(
            f"logistic fit did not converge (|score|={np.abs(score).max():.3e})",
            last_coefficients=beta,
            gradient_norm=float(np.abs(score).max()),
        )
    # complete separation: the fitted index classifies every observation
    # correctly with a wide margin, so the data are separable and the true
    # ML solution diverges; the finite iterate is a numerical artifact.
    if np.abs(eta).min() > 5.0 and ((eta > 0) == (y == 1.0)).all():
        raise PerfectSeparation(
            "every fitted probability is pinned at its observed response"
        )
    w = p * (1.0 - p)
    info = (X * w[:, None]).T @ X
    score_obs = X * (y - p)[:, None]
    fit = FitResult(design, "logistic", beta, _logistic_ll(y, eta), info, score_obs)
    if _null:
        _attach_statistics(fit, _logistic_null_ll(y))
    return fit


def _logistic_null_ll(y):
    pbar = y.mean()
    if pbar in (0.0, 1.0):
        return 0.0
    n = len(y)
    return float(n * (pbar * np.log(pbar) + (1 - pbar) * np.log(1 - pbar)))


def _negbin_ll(y, mu, theta):
    return float(
        (
            gammaln(y + theta)
            - gammaln(theta)
            - gammaln(y + 1.0)
            + theta * np.log(theta / (theta + mu))
            + xlogy(y, mu / (theta + mu))
        ).sum()
    )


def _poisson_ll(y, mu):
    return float((xlogy(y, mu) - mu - gammaln(y + 1.0)).sum())


def _theta_score(y, mu, theta):
    return float(
        (
            digamma(y + theta)
            - digamma(theta)
            + np.log(theta)
            + 1.0
            - np.log(theta + mu)
            - (y + theta) / (theta + mu)
        ).sum()
    )


def _theta_hessian(y, mu, theta):
    return float(
        (
            polygamma(1, y + theta)
            - polygamma(1, theta)
            + 1.0 / theta
            - 2.0 / (theta + mu)
            + (y + theta) / (theta + mu) ** 2
        ).sum()
    )


def _moment_theta(y, mu):
    excess = ((y - mu) ** 2 - mu).sum()
    if excess <= 0:
        return THETA_CAP
    return float(np.clip((mu**2).sum() / excess, 1e-2, THETA_CAP))


def fit_negbin(design, fixed_theta=None, _null=True):
    """Alternating Newton ML for the NB2 model (variance mu + mu^2/theta).

    With fixed_theta=np.inf the weights reduce to the Poisson case, which
    is also the reported limit when the dispersion diverges.
    """
    X, y = design.X, design.y
    # Poisson warm start for beta
    beta = np.zeros(X.shape[1])
    beta[0] = np.log(max(y.mean(), 1e-8))
    for _ in range(25):
        mu = np.exp(np.clip(X @ beta, -30, 30))
        score = X.T @ (y - mu)
        if np.abs(score).max() < 1e-6:
            break
        beta = beta + _solve_spd((X * mu[:, None]).T @ X, score)

    mu = np.exp(np.clip(X @ beta, -30, 30))
    theta = fixed_theta if fixed_theta is not None else _moment_theta(y, mu)
    flags = []

    def weights(mu, theta):
        if np.isinf(theta):
            return mu
        return mu / (1.0 + mu / theta)

    def ll_of(mu, theta):
        return _poisson_ll(y, mu) if np.isinf(theta) else _negbin_ll(y, mu, theta)

    ll = ll_of(mu, theta)
    converged = False
    for _ in range(MAX_ITER):
        # beta step (Fisher scoring)
        mu = np.exp(np.clip(X @ beta, -30, 30))
        adj = (y - mu) if np.isinf(theta) else (y - mu) / (1.0 + mu / theta)
        score = X.T @ adj
        beta_done = np.abs(score).max() < SCORE_TOL
        if not beta_done:
            A = (X * weights(mu, theta)[:, None]).T @ X
            step = _solve_spd(A, score)
            for _ in range(30):
                mu_new = np.exp(np.clip(X @ (beta + step), -30, 30))
                if ll_of(mu_new, theta) >= ll - 1e-12:
                    break
                step *= 0.5
            beta = beta + step
            mu = np.exp(np.clip(X @ beta, -30, 30))

        # theta step (Newton on log(theta))
        theta_done = True
        if fixed_theta is None and not np.isinf(theta):
            g = _theta_score(y, mu, theta)
            theta_done = abs(g) < SCORE_TOL * max(1.0, len(y) / 100.0)
            if not theta_done:
                h = _theta_hessian(y, mu, theta)
                g_log = theta * g
                h_log = theta**2 * h + g_log
                step_log = -g_log / h_log if h_log < 0 else np.sign(g_log) * 0.5
                step_log = np.clip(step_log, -2.0, 2.0)
                ll_cur = ll_of(mu, theta)
                for _ in range(30):
                    theta_new = float(np.clip(theta * np.exp(step_log), 1e-4, THETA_CAP))
                    if ll_of(mu, theta_new) >= ll_cur - 1e-12:
                        break
                    step_log *= 0.5
                theta = theta_new
                if theta >= THETA_CAP:
                    theta_done = True

        ll_new = ll_of(mu, theta)
        if beta_done and theta_done:
            converged = True
            break
        if abs(ll_new - ll) < LL_REL_TOL * (abs(ll_new) + 1e-12):
            converged = True
            break
        ll = ll_new

    mu = np.exp(np.clip(X @ beta, -30, 30))
    adj = (y - mu) if np.isinf(theta) else (y - mu) / (1.0 + mu / theta)
    score = X.T @ adj
    if not converged and np.abs(score).max() >= SCORE_TOL:
        raise NonConvergence(
            f"negbin fit did not converge (|score|={np.abs(score).max():.3e})",
            last_coefficients=beta,
            gradient_norm=float(np.abs(score).max()),
        )
    if not np.isinf(theta) and theta >= THETA_POISSON_FLAG:
        flags.append("poisson_limit")
    info = (X * weights(mu, theta)[:, None]).T @ X
    score_obs = X * adj[:, None]
    dispersion_se = None
    if fixed_theta is None and not np.isinf(theta) and theta < THETA_POISSON_FLAG:
        h = _theta_hessian(y, mu, theta)
        if h < 0:
            dispersion_se = float(np.sqrt(-1.0 / h))
    fit = FitResult(
        design,
        "negbin",
        beta,
        ll_of(mu, theta),
        info,
        score_obs,
        dispersion=float(theta),
        dispersion_se=dispersion_se,
        flags=flags,
    )
    if _null:
        _attach_statistics(fit, _negbin_null_ll(design, y))
    return fit


def _negbin_null_ll(design, y):
    null = _InterceptDesign(len(y), y, design)
    return fit_negbin(null, _null=False).loglik


def fit_ols(design, _null=True):
    """Least squares with Gaussian ML log-likelihood."""
    X, y = design.X, design.y
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise RankDeficient("OLS design is rank deficient")
    resid = y - X @ beta
    n = len(y)
    rss = float(resid @ resid)
    sigma2 = max(rss / n, 1e-300)
    ll = -0.5 * n * (np.log(2.0 * np.pi * sigma2) + 1.0)
    tss = float(((y - y.mean()) ** 2).sum())
    info = X.T @ X / sigma2
    score_obs = X * (resid / sigma2)[:, None]
    fit = FitResult(design, "gaussian", beta, ll, info, score_obs, dispersion=sigma2)
    fit.r2 = 1.0 - rss / tss if tss > 0 else 0.0
    if _null:
        tss_ll = -0.5 * n * (np.log(2.0 * np.pi * max(tss / n, 1e-300)) + 1.0)
        _attach_statistics(fit, tss_ll)
    return fit


class _InterceptDesign:
    """Minimal stand-in design for intercept-only null fits."""

    def __init__(self, n, y, parent):
        self.X = np.ones((n, 1))
        self.y = y
        self.names = ["(Intercept)"]
        self.n = n
        self.n_dropped_na = parent.n_dropped_na
        self.n_dropped_separation = parent.n_dropped_separation
        self.cluster_ids = parent.cluster_ids


def _attach_statistics(fit, loglik_null):
    """McFadden pseudo-R2 and information criteria.

    The null log-likelihood is intercept-only on the same retained rows;
    the parameter count includes FE dummies and the NB dispersion.
    """
    fit.loglik_null = float(loglik_null)
    fit.pseudo_r2 = (
        1.0 - fit.loglik / fit.loglik_null if fit.loglik_null != 0 else 0.0
    )
    p = fit.n_params
    fit.aic = 2.0 * p - 2.0 * fit.loglik
    fit.bic = p * np.log(fit.n_used) - 2.0 * fit.loglik


def fit_model(design):
    """Dispatch on the spec family."""
    family = design.spec.family
    if family == "logistic":
        return fit_logistic(design)
    if family == "negbin":
        return fit_negbin(design)
    return fit_ols(design)
