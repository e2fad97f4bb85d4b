"""Binary-response GLM (logit / probit) fitted by Newton-Raphson.

The optimizer works on an internally standardized design for conditioning
and reports coefficients and covariance in raw regressor units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.linalg import cho_solve

LINKS = ("logit", "probit")
_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


class DegenerateResponseError(ValueError):
    pass


def normal_cdf(x):
    return special.ndtr(x)


def normal_quantile(p):
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr <= 0) | (p_arr >= 1)) or np.any(np.isnan(p_arr)):
        raise ValueError("normal_quantile needs p strictly inside (0, 1)")
    out = special.ndtri(p_arr)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class GlmSpec:
    link: str = "logit"
    columns: tuple[str, ...] = ()

    def __post_init__(self):
        if self.link not in LINKS:
            raise ValueError(f"unknown link {self.link!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return ("const",) + tuple(self.columns)


@dataclass(frozen=True)
class FitOptions:
    max_iter: int = 100
    ll_rtol: float = 1e-10
    grad_tol: float = 1e-8
    alpha: float = 0.05
    # standardized-scale coefficient magnitude treated as divergence
    separation_bound: float = 40.0
    ridge: float = 1e-8


@dataclass
class GlmFit:
    names: tuple[str, ...]
    link: str
    coefficients: np.ndarray
    covariance: np.ndarray
    std_errors: np.ndarray
    z_stats: np.ndarray
    significance: tuple[str, ...]
    loglik: float
    loglik_null: float
    rho_square: float
    accuracy: float
    converged: bool
    iterations: int
    n_obs: int
    reason: str = ""
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(a):
            return [None if not np.isfinite(v) else float(v) for v in np.asarray(a, dtype=float)]

        return {
            "link": self.link,
            "names": list(self.names),
            "coefficients": clean(self.coefficients),
            "std_errors": clean(self.std_errors),
            "z": clean(self.z_stats),
            "significance": list(self.significance),
            "loglik": float(self.loglik),
            "loglik_null": float(self.loglik_null),
            "rho_square": float(self.rho_square) if np.isfinite(self.rho_square) else None,
            "accuracy": float(self.accuracy),
            "converged": self.converged,
            "iterations": self.iterations,
            "n_obs": self.n_obs,
            "reason": self.reason,
            "diagnostics": self.diagnostics,
        }


# -- link-specific pieces, all in terms of the linear predictor eta --------

def _loglik(eta, y, link):
    if link == "logit":
        return float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    q = 2.0 * y - 1.0
    return float(np.sum(special.log_ndtr(q * eta)))


def _score_and_weights(eta, y, link):
    """Per-observation score factor and negative-Hessian weight."""
    if link == "logit":
        p = special.expit(eta)
        return y - p, p * special.expit(-eta)
    q = 2.0 * y - 1.0
    qe = q * eta
    lam = q * np.exp(-0.5 * qe * qe - _LOG_SQRT_2PI - special.log_ndtr(qe))
    return lam, lam * (lam + eta)


def _inverse_link(p: float, link: str) -> float:
    return float(special.logit(p)) if link == "logit" else float(special.ndtri(p))


def predict_proba(fit: GlmFit, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    eta = fit.coefficients[0] + X @ fit.coefficients[1:]
    return special.expit(eta) if fit.link == "logit" else special.ndtr(eta)


def null_loglik(y) -> float:
    """Log-likelihood of the intercept-only MLE, identical for both links."""
    y = np.asarray(y, dtype=float)
    n = y.size
    n1 = float(y.sum())
    n0 = n - n1
    if n1 == 0 or n0 == 0:
        return 0.0
    return n1 * math.log(n1 / n) + n0 * math.log(n0 / n)


def mcfadden_rho2(loglik_fitted: float, loglik_null: float) -> float:
    if loglik_null == 0:
        raise ValueError("null log-likelihood is zero; rho-square undefined")
    return 1.0 - loglik_fitted / loglik_null


def odds_effect(beta: float, dx: float) -> float:
    """Relative change in the odds when a regressor moves by ``dx``."""
    return math.expm1(beta * dx)


def classify_and_score(fit: GlmFit, X, y) -> float:
    """Share of responses matched by thresholding fitted probabilities at 0.5."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("no observations")
    pred = (predict_proba(fit, X) >= 0.5).astype(float)
    return float(np.mean(pred == y))


def wald_significance(fit: GlmFit, alpha: float = 0.05) -> tuple[str, ...]:
    """Two-sided Wald test per coefficient: ``"+"``, ``"-"`` or ``"0"``."""
    crit = normal_quantile(1.0 - alpha / 2.0)
    out = []
    for b, se in zip(fit.coefficients, fit.std_errors):
        if not (np.isfinite(se) and se > 0 and np.isfinite(b)):
            out.append("0")
            continue
        z = b / se
        out.append("+" if z > crit else "-" if z < -crit else "0")
    return tuple(out)


def _cholesky(H, ridge, diag):
    try:
        return np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        diag["ridge"] = ridge
        return np.linalg.cholesky(H + ridge * np.eye(len(H)))


def _solve(H, g, ridge, diag):
    return cho_solve((_cholesky(H, ridge, diag), True), g)


def _invert(H, ridge, diag):
    Linv = np.linalg.inv(_cholesky(H, ridge, diag))
    cov = Linv.T @ Linv
    return 0.5 * (cov + cov.T)


def fit(spec: GlmSpec, X, y, options: FitOptions = FitOptions()) -> GlmFit:
    """Maximum-likelihood fit of ``P(y=1) = F(b0 + X b)``.

    ``X`` holds the regressors only; the intercept is always added. Perfect
    or quasi-perfect separation ends the iteration with ``converged=False``
    and ``reason="separation"``; a singular information matrix is
    regularized with a tiny ridge, noted in ``diagnostics``.
    """
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    X = np.asarray(X, dtype=float).reshape(n, -1)
    p = X.shape[1]
    if len(spec.columns) not in (0, p):
        raise ValueError(f"spec names {len(spec.columns)} columns, design has {p}")
    names = spec.names if spec.columns else ("const",) + tuple(f"x{j}" for j in range(1, p + 1))
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y must be binary")
    if n < p + 2:
        raise ValueError(f"need at least {p + 2} observations for {p + 1} coefficients")
    ybar = float(y.mean())
    if ybar in (0.0, 1.0):
        raise DegenerateResponseError("degenerate response")
    if not np.all(np.isfinite(X)):
        raise ValueError("design matrix contains non-finite values")

    link = spec.link
    ll_null = null_loglik(y)
    diag: dict = {}

    if p == 0:
        b0 = _inverse_link(ybar, link)
        if link == "logit":
            info = n * ybar * (1 - ybar)
        else:
            info = n * math.exp(-b0 * b0 - 2 * _LOG_SQRT_2PI) / (ybar * (1 - ybar))
        coef = np.array([b0])
        cov = np.array([[1.0 / info]])
        return _finish(names, link, coef, cov, ll_null, ll_null, True, 0, n, "", diag, X, y, options)

    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    const_cols = sd == 0
    mu = np.where(const_cols, 0.0, mu)
    sd = np.where(const_cols, 1.0, sd)
    Z = np.empty((n, p + 1))
    Z[:, 0] = 1.0
    Z[:, 1:] = (X - mu) / sd
    diag["condition_number"] = float(np.linalg.cond(np.column_stack([np.ones(n), X])))

    beta = np.zeros(p + 1)
    beta[0] = _inverse_link(ybar, link)
    eta = Z @ beta
    ll = _loglik(eta, y, link)
    converged = False
    reason = ""
    it = 0
    while it < options.max_iter:
        r, w = _score_and_weights(eta, y, link)
        g = Z.T @ r
        if np.max(np.abs(g)) < options.grad_tol:
            converged = True
            break
        H = Z.T @ (w[:, None] * Z)
        step = _solve(H, g, options.ridge, diag)
        it += 1
        t = 1.0
        while True:
            cand = beta + t * step
            eta_c = Z @ cand
            ll_c = _loglik(eta_c, y, link)
            if ll_c >= ll or t < 1e-10:
                break
            t *= 0.5
        if ll_c < ll:
            reason = "line_search"
            break
        beta, eta, ll_prev, ll = cand, eta_c, ll, ll_c
        if np.max(np.abs(beta[1:])) > options.separation_bound or ll > -1e-9 * n:
            reason = "separation"
            break
        if abs(ll - ll_prev) <= options.ll_rtol * abs(ll_prev):
            converged = True
            break
    else:
        reason = "max_iter"

    _, w = _score_and_weights(eta, y, link)
    H = Z.T @ (w[:, None] * Z)
    cov_std = _invert(H, options.ridge, diag)
    T = np.zeros((p + 1, p + 1))
    T[0, 0] = 1.0
    T[0, 1:] = -mu / sd
    T[np.arange(1, p + 1), np.arange(1, p + 1)] = 1.0 / sd
    coef = T @ beta
    cov = T @ cov_std @ T.T
    cov = 0.5 * (cov + cov.T)
    if np.any(const_cols):
        diag["constant_columns"] = [names[j + 1] for j in np.flatnonzero(const_cols)]
    return _finish(names, link, coef, cov, ll, ll_null, converged, it, n, reason, diag, X, y, options)


def _finish(names, link, coef, cov, ll, ll_null, converged, it, n, reason, diag, X, y, options):
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, coef / se, np.nan)
    if np.any(se == 0):
        diag["zero_se"] = [names[j] for j in np.flatnonzero(se == 0)]
    result = GlmFit(
        names=tuple(names),
        link=link,
        coefficients=coef,
        covariance=cov,
        std_errors=se,
        z_stats=z,
        significance=(),
        loglik=ll,
        loglik_null=ll_null,
        rho_square=mcfadden_rho2(ll, ll_null) if ll_null != 0 else float("nan"),
        accuracy=0.0,
        converged=converged,
        iterations=it,
        n_obs=n,
        reason=reason,
        diagnostics=diag,
    )
    result.significance = wald_significance(result, options.alpha)
    result.accuracy = classify_and_score(result, X, y)
    return result


def score_vector(coefficients, X, y, link: str) -> np.ndarray:
    """Analytic gradient of the log-likelihood in raw coefficient units."""
    X = np.asarray(X, dtype=float)
    Z = np.column_stack([np.ones(len(X)), X])
    r, _ = _score_and_weights(Z @ np.asarray(coefficients, dtype=float), np.asarray(y, dtype=float), link)
    return Z.T @ r


def loglik_at(coefficients, X, y, link: str) -> float:
    X = np.asarray(X, dtype=float)
    Z = np.column_stack([np.ones(len(X)), X])
    return _loglik(Z @ np.asarray(coefficients, dtype=float), np.asarray(y, dtype=float), link)

