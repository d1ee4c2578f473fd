import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import expit
from hypothesis import given, settings
from hypothesis import strategies as st

from binlat.glm import (
    ConvergenceWarning,
    SingularInformationError,
    fit_glm,
    glm_loglik,
    glm_prob_limit,
    info_matrices,
)
from binlat.model import ObservationSeries, trend_design
from binlat.numerics import RandomSource
from binlat.simulation import DgpSpec, simulate_series


def _intercept(y, m):
    y = np.asarray(y)
    return ObservationSeries(y, np.broadcast_to(m, y.shape).copy(), np.ones((y.size, 1)))


def test_intercept_only_closed_form():
    fit = fit_glm(_intercept([1] * 30 + [0] * 70, 1))
    assert fit.converged
    assert fit.beta_hat[0] == pytest.approx(np.log(0.3 / 0.7), abs=1e-10)
    assert fit.beta_hat[0] == pytest.approx(-0.8472978, abs=1e-7)


def test_half_successes_gives_zero():
    fit = fit_glm(_intercept(np.ones(20, dtype=int), 2))
    assert fit.beta_hat[0] == pytest.approx(0.0, abs=1e-12)


def test_simulated_fit_within_three_se():
    s = simulate_series(DgpSpec(n=500, m=1, tau=0.0), RandomSource(101))
    fit = fit_glm(s)
    d = fit.beta_hat - np.array([1.0, 2.0])
    # joint check via the Mahalanobis distance against chi2(2) at 3 s.e. scale
    cov = fit.covariance(s)
    assert np.all(np.abs(d) < 3 * np.sqrt(np.diag(cov)))
    assert d @ np.linalg.solve(cov, d) < 11.8


def test_score_zero_and_loglik():
    s = simulate_series(DgpSpec(n=300, m=3, tau=0.5), RandomSource(7))
    fit = fit_glm(s)
    assert fit.converged
    assert np.max(np.abs(fit.resid @ s.x)) < 1e-6
    assert fit.loglik == pytest.approx(glm_loglik(s, fit.beta_hat))
    for d in ([0.01, 0], [0, -0.01]):
        assert glm_loglik(s, fit.beta_hat + np.array(d)) < fit.loglik


def test_rank_deficient():
    x = np.column_stack([np.ones(10), np.ones(10)])
    s = ObservationSeries(np.arange(10) % 2, np.ones(10, dtype=int), x)
    with pytest.raises(SingularInformationError):
        fit_glm(s)


def test_separation_flagged():
    x = np.column_stack([np.ones(10), np.arange(10.0)])
    s = ObservationSeries((np.arange(10) >= 5).astype(int), np.ones(10, dtype=int), x)
    with pytest.warns(ConvergenceWarning):
        fit = fit_glm(s)
    assert not fit.converged


def test_info_examples():
    info = info_matrices(_intercept(np.zeros(7, dtype=int), 1), [0.0])
    assert info.I[0, 0] == pytest.approx(0.25)
    assert info.J[0] == 0.0
    assert info.K == 0.0

    info = info_matrices(_intercept(np.zeros(5, dtype=int), 2), [0.0])
    assert info.I[0, 0] == pytest.approx(0.5)
    assert info.K == pytest.approx(0.0625)

    info = info_matrices(_intercept(np.zeros(5, dtype=int), 1), [0.7])
    assert info.J[0] > 0


def test_info_is_negative_hessian():
    s = simulate_series(DgpSpec(n=200, m=2, tau=0.0), RandomSource(3))
    beta = np.array([0.8, 1.7])
    h = 1e-4
    H = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            ei, ej = np.eye(2)[i] * h, np.eye(2)[j] * h
            H[i, j] = (glm_loglik(s, beta + ei + ej) - glm_loglik(s, beta + ei - ej)
                       - glm_loglik(s, beta - ei + ej) + glm_loglik(s, beta - ei - ej)) / (4 * h * h)
    np.testing.assert_allclose(info_matrices(s, beta).I, -H / s.n, atol=1e-5)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 4), st.floats(0, 1)), min_size=5, max_size=40),
       st.floats(-2, 2), st.floats(-2, 2))
def test_info_properties(obs, b0, b1):
    m = np.array([o[0] for o in obs])
    y = np.zeros_like(m)
    x = trend_design(m.size)
    info = info_matrices(ObservationSeries(y, m, x), [b0, b1])
    assert np.all(np.linalg.eigvalsh(info.I) > 0)
    np.testing.assert_allclose(info.I, info.I.T)


def test_prob_limit_examples():
    x = trend_design(100)
    b = glm_prob_limit(1, x, [1.0, 2.0], 1e-12)
    np.testing.assert_allclose(b, [1.0, 2.0], atol=1e-5)
    b = glm_prob_limit(1, np.ones((50, 1)), [0.0], 2.0)
    assert b[0] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        glm_prob_limit(1, x, [1.0, 2.0], 0.0)


def test_prob_limit_attenuation_monotone():
    x = trend_design(500)
    slopes = [glm_prob_limit(1, x, [1.0, 2.0], t)[1] for t in (0.25, 0.5, 1.0, 2.0)]
    assert np.all(np.diff(slopes) < 0)
    b = glm_prob_limit(1, x, [1.0, 2.0], 1.0)
    assert np.linalg.norm(b - [1.0, 2.0]) > 0.05


def test_prob_limit_solves_estimating_equation():
    # independent check with adaptive quadrature for the smeared means
    x = trend_design(40)
    b = glm_prob_limit(2, x, [1.0, 2.0], 1.0)
    eta0 = x @ [1.0, 2.0]
    smeared = np.array([
        quad(lambda a: expit(e + a) * np.exp(-a * a / 2) / np.sqrt(2 * np.pi), -np.inf, np.inf)[0]
        for e in eta0
    ])
    eq = (2 * smeared - 2 * expit(x @ b)) @ x
    np.testing.assert_allclose(eq, 0.0, atol=1e-8)
