"""Marginal likelihood for binomial series with independent N(0, tau) latent effects.

All integrals over the latent variable use Gauss-Hermite rules against the
standard normal density, with more nodes for larger latent standard deviations.
Fitting uses one fixed rule so the objective stays smooth in tau. Per-observation quantities are computed on an
``(n, K)`` node grid with log-sum-exp stabilization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .glm import GlmFit, fit_glm, glm_loglik, log_binom
from .model import ModelError, ObservationSeries, link_derivatives
from .numerics import IntegrationError, QuadratureRule, gauss_hermite, maximize, scaled_rule

PILE_UP_SD = 1e-6
BETA_BOUND = 50.0
SD_BOUND = 10.0
SD_PROFILE = np.round(np.arange(0, 2.0001, 0.05), 2)
# logistic-normal attenuation constant (16 sqrt(3) / (15 pi))^2
_ATTENUATION = 0.346


@dataclass(frozen=True)
class MarginalFit:
    beta_hat: np.ndarray
    tau_hat: float
    pile_up: bool
    loglik: float
    converged: bool
    U: np.ndarray
    EU2: np.ndarray
    glm: GlmFit

    @property
    def sd_hat(self) -> float:
        return float(np.sqrt(self.tau_hat))


def _log_kernel(y, m, w):
    """log f(y | W) without the binomial coefficient."""
    return y * w - m * link_derivatives(w)[0]


def _posterior(y, m, eta, tau, rule):
    """Log marginal densities (without binomial coefficient) and posterior node weights."""
    y = np.asarray(y, dtype=float)[..., None]
    m = np.asarray(m, dtype=float)[..., None]
    w = np.asarray(eta, dtype=float)[..., None] + np.sqrt(tau) * rule.nodes
    lk = _log_kernel(y, m, w) + np.log(rule.weights)
    lf = logsumexp(lk, axis=-1)
    post = np.exp(lk - lf[..., None])
    return lf, post, w


def marginal_loglik(series: ObservationSeries, beta, tau: float, rule: QuadratureRule | None = None) -> float:
    """l_1(beta, tau): sum over t of the log of the latent-averaged binomial likelihood."""
    if tau < 0:
        raise ModelError("tau must be nonnegative")
    if tau == 0:
        return glm_loglik(series, beta)
    rule = rule or scaled_rule(np.sqrt(tau))
    eta = series.linear_predictor(beta)
    lf, _, _ = _posterior(series.y, series.m, eta, tau, rule)
    if not np.all(np.isfinite(lf)):
        raise IntegrationError("non-finite marginal density")
    return float(np.sum(lf + log_binom(series.m, series.y)))


def marginal_gradient(series: ObservationSeries, beta, tau: float, rule: QuadratureRule | None = None):
    """Gradient of l_1 in (beta, tau).

    The tau-derivative uses the Gaussian integration-by-parts form
    ``(1/2) E[(y - m pi)^2 - m pi (1 - pi) | y]``, which is finite at tau = 0.
    """
    rule = rule or scaled_rule(np.sqrt(tau))
    eta = series.linear_predictor(beta)
    y = series.y.astype(float)
    m = series.m.astype(float)
    if tau == 0:
        _, p, b2, _ = link_derivatives(eta)
        e = y - m * p
        return np.append(e @ series.x, 0.5 * np.sum(e**2 - m * b2))
    _, post, w = _posterior(y, m, eta, tau, rule)
    _, p, b2, _ = link_derivatives(w)
    e = y[:, None] - m[:, None] * p
    g_beta = np.sum(post * e, axis=1) @ series.x
    g_tau = 0.5 * np.sum(post * (e**2 - m[:, None] * b2))
    return np.append(g_beta, g_tau)


def obs_marginal_density(y, m, eta, tau, rule: QuadratureRule | None = None):
    """f(y) = E_z[Binomial pmf(y; m, logistic(eta + sqrt(tau) z))]."""
    rule = rule or scaled_rule(np.sqrt(tau))
    y_arr = np.asarray(y)
    m_arr = np.asarray(m)
    if np.any(y_arr < 0) or np.any(y_arr > m_arr):
        raise ModelError("need 0 <= y <= m")
    if tau < 0:
        raise ModelError("tau must be nonnegative")
    lf, _, _ = _posterior(y_arr, m_arr, eta, tau, rule)
    out = np.exp(lf + log_binom(m_arr, y_arr))
    return float(out) if np.ndim(out) == 0 else out


def conditional_residual(y, m, eta, tau, rule: QuadratureRule | None = None):
    """Return ``(u, EU2)`` for one observation.

    ``u = y - m E[b1(eta + sqrt(tau) Z) | y]`` and ``EU2 = sum_y f(y) u(y)^2``
    over all outcomes y = 0..m. The posterior mean of the standardized latent
    effect is ``sqrt(tau) * u``.
    """
    rule = rule or scaled_rule(np.sqrt(tau))
    if not 0 <= y <= m:
        raise ModelError("need 0 <= y <= m")
    ys = np.arange(m + 1)
    lf, post, w = _posterior(ys, np.full(m + 1, m), np.full(m + 1, eta, dtype=float), tau, rule)
    f = np.exp(lf + log_binom(m, ys))
    if np.any(f[ys == y] < 1e-300):
        raise IntegrationError("marginal density underflow")
    u = ys - m * np.sum(post * link_derivatives(w)[1], axis=1)
    return float(u[y]), float(np.sum(f * u**2))


def posterior_latent_mean(y, m, eta, tau, rule: QuadratureRule | None = None) -> float:
    """E(standardized latent | y) computed directly as a ratio of integrals."""
    rule = rule or scaled_rule(np.sqrt(tau))
    _, post, _ = _posterior(y, m, eta, tau, rule)
    return float(np.sum(post * rule.nodes))


def residual_moments(series: ObservationSeries, beta, tau: float, rule: QuadratureRule | None = None):
    """Per-observation conditional residuals U_t and their null second moments E(U_t^2)."""
    rule = rule or scaled_rule(np.sqrt(tau))
    eta = series.linear_predictor(beta)
    m = series.m
    M = series.max_trials
    ys = np.arange(M + 1, dtype=float)
    # (n, M+1, K) grid over all outcomes
    lf, post, w = _posterior(ys[None, :], m[:, None].astype(float), eta[:, None], tau, rule)
    u_all = ys[None, :] - m[:, None] * np.sum(post * link_derivatives(w)[1], axis=-1)
    valid = ys[None, :] <= m[:, None]
    f = np.exp(np.where(valid, lf + log_binom(np.maximum(m[:, None], ys[None, :]), ys[None, :]), -np.inf))
    eu2 = np.sum(f * u_all**2, axis=1)
    U = u_all[np.arange(series.n), series.y]
    return U, eu2


def _profile_start(series, glm, rule):
    best = (glm.loglik, glm.beta_hat, 0.0)
    for s in SD_PROFILE[1:]:
        beta = glm.beta_hat * np.sqrt(1 + _ATTENUATION * s**2)
        val = marginal_loglik(series, beta, s**2, rule)
        if val > best[0]:
            best = (val, beta, s**2)
    return best


def fit_marginal(series: ObservationSeries, rule: QuadratureRule | None = None,
                 glm: GlmFit | None = None) -> MarginalFit:
    """Maximize l_1 over beta and tau >= 0.

    A profile scan over latent standard deviations 0, 0.05, ..., 2 seeds a
    bounded quasi-Newton search in (beta, tau); a second search starts at the
    GLM solution. The better of the two wins. A fitted standard deviation at
    or below 1e-6 is reported as pile-up, and the GLM estimate is returned
    for beta.
    """
    fit_rule = rule or gauss_hermite()
    glm = glm or fit_glm(series)
    r = series.r
    lower = np.append(np.full(r, -BETA_BOUND), 0.0)
    upper = np.append(np.full(r, BETA_BOUND), SD_BOUND**2)

    def obj(theta):
        return marginal_loglik(series, theta[:r], theta[r], fit_rule)

    def grad(theta):
        return marginal_gradient(series, theta[:r], theta[r], fit_rule)

    _, b0, t0 = _profile_start(series, glm, fit_rule)
    starts = [np.append(np.clip(b0, -BETA_BOUND, BETA_BOUND), t0)]
    starts.append(np.append(np.clip(glm.beta_hat, -BETA_BOUND, BETA_BOUND), 0.0))
    best = None
    for x0 in starts:
        res = maximize(obj, x0, lower, upper, grad=grad, gtol=1e-9)
        if best is None or res.value > best.value:
            best = res
    tau = float(best.x[r])
    beta = best.x[:r]
    pile_up = np.sqrt(tau) <= PILE_UP_SD
    converged = best.converged
    if pile_up:
        tau, beta, loglik = 0.0, glm.beta_hat, glm.loglik
        converged = glm.converged
    else:
        loglik = best.value
    U, eu2 = residual_moments(series, beta, tau, rule)
    return MarginalFit(beta_hat=np.asarray(beta, dtype=float), tau_hat=tau, pile_up=bool(pile_up),
                       loglik=float(loglik), converged=bool(converged), U=U, EU2=eu2, glm=glm)


def marginal_covariance(series: ObservationSeries, fit: MarginalFit,
                        rule: QuadratureRule | None = None, h: float = 1e-5) -> np.ndarray | None:
    """Inverse negative Hessian of l_1 at the fit, in (beta, tau).

    Returns None at the boundary (pile-up), where the usual asymptotics do not apply.
    """
    if fit.pile_up:
        return None
    rule = rule or scaled_rule(fit.sd_hat)
    theta = np.append(fit.beta_hat, fit.tau_hat)
    r = series.r
    k = theta.size
    H = np.empty((k, k))
    for i in range(k):
        e = np.zeros(k)
        e[i] = h * max(1.0, abs(theta[i]))
        gp = marginal_gradient(series, (theta + e)[:r], (theta + e)[r], rule)
        gm = marginal_gradient(series, (theta - e)[:r], max((theta - e)[r], 0.0), rule)
        H[:, i] = (gp - gm) / (2 * e[i])
    H = (H + H.T) / 2
    return np.linalg.inv(-H)
