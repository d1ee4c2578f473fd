"""Logistic GLM fitting under tau = 0 and the score-variance ingredients I_n, J_n, K_n."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .model import ModelError, ObservationSeries, conditional_moments, link_derivatives
from .numerics import QuadratureRule, scaled_rule


SEPARATION_PROB = 1e-10


class SingularInformationError(ModelError):
    """The design is rank deficient, so I_n cannot be inverted."""


class ConvergenceWarning(UserWarning):
    pass


def log_binom(m, y):
    m = np.asarray(m, dtype=float)
    y = np.asarray(y, dtype=float)
    return gammaln(m + 1) - gammaln(y + 1) - gammaln(m - y + 1)


def glm_loglik(series: ObservationSeries, beta) -> float:
    """l_0(beta), including the binomial coefficients."""
    eta = series.linear_predictor(beta)
    b = link_derivatives(eta)[0]
    return float(np.sum(series.y * eta - series.m * b + log_binom(series.m, series.y)))


@dataclass(frozen=True)
class GlmFit:
    beta_hat: np.ndarray
    loglik: float
    converged: bool
    iterations: int
    pi: np.ndarray
    sigma2: np.ndarray
    resid: np.ndarray
    score: np.ndarray

    def covariance(self, series: ObservationSeries) -> np.ndarray:
        """Asymptotic covariance ``I_n^{-1} / n`` of ``beta_hat``."""
        info = info_matrices(series, self.beta_hat)
        return np.linalg.inv(info.I) / series.n


@dataclass(frozen=True)
class InfoMatrices:
    """Information-type quantities used to standardize the tau-score.

    ``I`` is the mean Fisher information (r x r), ``J`` the mean covariance
    between the tau-score and the beta-score (r-vector, with its -1/2
    factor) and ``K`` the mean variance of the tau-score increments.
    """

    I: np.ndarray
    J: np.ndarray
    K: float


def info_matrices(series: ObservationSeries, beta) -> InfoMatrices:
    eta = series.linear_predictor(beta)
    _, _, b2, b3 = link_derivatives(eta)
    n, m, x = series.n, series.m, series.x
    I = (x.T * (m * b2)) @ x / n
    J = -(m * b3) @ x / (2 * n)
    s2 = m * b2
    K = float(np.sum(s2 * (1 + (2 - 6 / m) * s2)) / (4 * n))
    return InfoMatrices(I=I, J=J, K=K)


def _check_rank(x: np.ndarray):
    if np.linalg.matrix_rank(x) < x.shape[1]:
        raise SingularInformationError(f"design matrix has rank < {x.shape[1]}")


def _newton(x, m, target, beta, max_iter=100, tol=1e-8):
    """Solve ``sum_t (target_t - m_t b1(x_t'beta)) x_t = 0`` by Newton steps.

    ``target`` is y for the GLM fit. The objective ``sum target*eta - m*b`` is
    concave, so step halving keeps it non-decreasing.
    """

    def obj(b):
        eta = x @ b
        return float(np.sum(target * eta - m * link_derivatives(eta)[0]))

    cur = obj(beta)
    for it in range(1, max_iter + 1):
        eta = x @ beta
        _, p, b2, _ = link_derivatives(eta)
        grad = (target - m * p) @ x
        if np.max(np.abs(grad)) < tol:
            return beta, True, it - 1
        info = (x.T * (m * b2)) @ x
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            return beta, False, it
        t = 1.0
        while True:
            cand = beta + t * step
            val = obj(cand)
            if val >= cur - 1e-12 * abs(cur) or t < 1e-10:
                break
            t /= 2
        beta, cur = cand, val
        if np.max(np.abs(beta)) > 1e3:
            return beta, False, it
    eta = x @ beta
    grad = (target - m * link_derivatives(eta)[1]) @ x
    return beta, bool(np.max(np.abs(grad)) < tol), max_iter


def fit_glm(series: ObservationSeries, max_iter: int = 100, tol: float = 1e-8) -> GlmFit:
    """Maximize the logistic log-likelihood ignoring any latent process.

    Complete or quasi-complete separation shows up as ``converged=False``
    (with a :class:`ConvergenceWarning`); it is never silently accepted.
    """
    _check_rank(series.x)
    m = series.m.astype(float)
    ybar = np.clip((series.y + 0.5) / (m + 1.0), 1e-6, 1 - 1e-6)
    init = np.linalg.lstsq(series.x, np.log(ybar / (1 - ybar)), rcond=None)[0]
    beta, converged, iters = _newton(series.x, m, series.y.astype(float), init, max_iter, tol)
    # under separation the score vanishes only as fitted probabilities reach 0 or 1
    p = link_derivatives(series.x @ beta)[1]
    if np.any(np.minimum(p, 1 - p) < SEPARATION_PROB):
        converged = False
    if not converged:
        warnings.warn("GLM fit did not converge (possible separation)", ConvergenceWarning, stacklevel=2)
    cm = conditional_moments(series, beta)
    fit = GlmFit(beta_hat=beta, loglik=glm_loglik(series, beta), converged=converged,
                 iterations=iters, pi=cm.pi, sigma2=cm.sigma2, resid=cm.resid,
                 score=cm.resid @ series.x)
    return fit


def glm_prob_limit(m, x, beta0, tau0: float, rule: QuadratureRule | None = None,
                   max_iter: int = 100, tol: float = 1e-10) -> np.ndarray:
    """Probability limit beta' of the GLM estimate when a latent N(0, tau0) term is present.

    Each observation's mean is smeared over the latent distribution and beta'
    is the logistic fit to those smeared means.
    """
    if not tau0 > 0:
        raise ValueError("tau0 must be positive")
    x = np.asarray(x, dtype=float)
    m = np.broadcast_to(np.asarray(m, dtype=float), (x.shape[0],))
    _check_rank(x)
    rule = rule or scaled_rule(np.sqrt(tau0))
    eta = x @ np.asarray(beta0, dtype=float)
    smeared = link_derivatives(eta[:, None] + np.sqrt(tau0) * rule.nodes[None, :])[1] @ rule.weights
    beta, converged, _ = _newton(x, m, m * smeared, np.asarray(beta0, dtype=float), max_iter, tol * x.shape[0])
    if not converged:
        warnings.warn("beta' solver did not converge", ConvergenceWarning, stacklevel=2)
    return beta
