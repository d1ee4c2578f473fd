import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from binlat.numerics import (
    BracketError,
    IntegrationError,
    RandomSource,
    binomial_draws,
    chi2_quantile,
    chi2_tail,
    find_root,
    gauss_hermite,
    gaussian_expectation,
    maximize,
    normal_moment,
    scaled_rule,
)


def test_rule_moments():
    rule = gauss_hermite(40)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert rule.weights @ rule.nodes == pytest.approx(0.0, abs=1e-10)
    assert rule.weights @ rule.nodes**2 == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("k", [5, 10, 40])
def test_polynomial_exactness(k):
    rule = gauss_hermite(k)
    for deg in range(0, 2 * k):
        got = gaussian_expectation(lambda z: (z / 3) ** deg, rule)
        # odd moments cancel, so tolerate error relative to the nearby even moment
        scale = normal_moment(deg + deg % 2) / 3.0 ** (deg + deg % 2)
        assert got == pytest.approx(normal_moment(deg) / 3.0**deg, rel=1e-10, abs=1e-10 * max(scale, 1.0))


def test_scaled_rule_sizes():
    assert scaled_rule(0.0).size == 40
    assert scaled_rule(1.0).size == 60
    assert scaled_rule(2.0).size == 120
    assert scaled_rule(50.0).size == 200


def test_scaled_rule_logistic_accuracy():
    from scipy.integrate import quad
    from scipy.special import expit
    from scipy.stats import norm

    for sd in (0.5, 1.0, 2.0):
        want = quad(lambda z: expit(sd * z) ** 2 * norm.pdf(z), -np.inf, np.inf, epsabs=1e-13)[0]
        got = gaussian_expectation(lambda z: expit(sd * z) ** 2, scaled_rule(sd))
        assert abs(got - want) < 1e-9


def test_expectation_examples():
    assert gaussian_expectation(lambda z: np.ones_like(z)) == pytest.approx(1.0)
    assert gaussian_expectation(lambda z: z**2) == pytest.approx(1.0)
    val = gaussian_expectation(lambda z: np.exp(0.3 * z), verify=True)
    assert val == pytest.approx(math.exp(0.045), rel=1e-12)
    assert val == pytest.approx(1.046028, abs=1e-6)


def test_expectation_nan_and_verify():
    with pytest.raises(IntegrationError):
        gaussian_expectation(lambda z: np.where(z > 0, np.nan, 1.0))
    # a kink at 0 defeats a 3-point rule
    with pytest.raises(IntegrationError):
        gaussian_expectation(lambda z: np.abs(z), gauss_hermite(3), verify=True)


def test_chi2_table_values():
    got = [round(chi2_quantile(p, 1), 2) for p in (0.20, 0.10, 0.05, 0.01)]
    assert got == [1.64, 2.71, 3.84, 6.63]
    assert chi2_tail(0, 3) == 1.0
    assert chi2_tail(4.60517, 2) == pytest.approx(math.exp(-4.60517 / 2), abs=1e-12)
    assert chi2_tail(4.60517, 2) == pytest.approx(0.10, abs=1e-6)


@pytest.mark.parametrize("u", [0.1, 1, 5, 20])
@pytest.mark.parametrize("df", [1, 2, 5])
def test_chi2_roundtrip(u, df):
    assert chi2_quantile(chi2_tail(u, df), df) == pytest.approx(u, abs=1e-8)


def test_chi2_domain():
    with pytest.raises(ValueError):
        chi2_tail(1.0, 0)
    with pytest.raises(ValueError):
        chi2_quantile(0.5, -1)
    with pytest.raises(ValueError):
        chi2_quantile(1.0, 1)


def test_maximize_examples():
    r = maximize(lambda x: -(x[0] - 2) ** 2, [0.0], [-10], [10])
    assert r.converged and r.x[0] == pytest.approx(2, abs=1e-6)
    r = maximize(lambda x: -(x[0] + 1) ** 2, [5.0], [0], [10])
    assert r.x[0] == 0.0


def test_maximize_logistic_matches_grid():
    x = np.array([-2.0, -1.5, -1.0, -0.5, 0.0, 0.3, 0.8, 1.2, 1.9, 2.5])
    y = np.array([0, 0, 1, 0, 0, 1, 0, 1, 1, 1])

    def ll(b):
        eta = b[0] + b[1] * x
        return float(np.sum(y * eta - np.logaddexp(0, eta)))

    r = maximize(ll, [0.0, 0.0])
    # coarse grid, then a 1e-4 grid around the coarse optimum
    coarse = np.arange(-3, 3, 0.01)
    vals = np.array([[ll((a, b)) for b in coarse] for a in coarse])
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    fine_a = coarse[i] + np.arange(-0.01, 0.01, 1e-4)
    fine_b = coarse[j] + np.arange(-0.01, 0.01, 1e-4)
    vals = np.array([[ll((a, b)) for b in fine_b] for a in fine_a])
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    assert r.x[0] == pytest.approx(fine_a[i], abs=1e-4)
    assert r.x[1] == pytest.approx(fine_b[j], abs=1e-4)


def test_find_root():
    assert find_root(lambda x: x - 1, 0, 2) == pytest.approx(1, abs=1e-10)
    assert find_root(lambda x: x * x - 2, 0, 2) == pytest.approx(math.sqrt(2), abs=1e-10)
    with pytest.raises(BracketError):
        find_root(lambda x: x * x + 1, -1, 1)


def test_streams_reproducible_and_distinct():
    a = RandomSource(7, 3).generator().standard_normal(100)
    b = RandomSource(7, 3).generator().standard_normal(100)
    c = RandomSource(7, 4).generator().standard_normal(100)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert abs(np.corrcoef(RandomSource(1, 0).generator().standard_normal(10_000),
                           RandomSource(1, 1).generator().standard_normal(10_000))[0, 1]) < 0.04


def test_normal_mean():
    z = RandomSource(11).generator().standard_normal(1_000_000)
    assert abs(z.mean()) < 0.004


def test_binomial_degenerate_and_frequencies():
    rng = RandomSource(5).generator()
    assert np.all(binomial_draws(rng, 3, np.zeros(100)) == 0)
    assert np.all(binomial_draws(rng, 3, np.ones(100)) == 3)
    d = binomial_draws(rng, 2, np.full(100_000, 0.5))
    freq = np.bincount(d, minlength=3) / d.size
    np.testing.assert_allclose(freq, [0.25, 0.5, 0.25], atol=0.01)


@given(st.lists(st.integers(1, 5), min_size=1, max_size=30), st.integers(0, 2**32))
def test_binomial_within_trials(ms, seed):
    m = np.array(ms)
    y = binomial_draws(RandomSource(seed).generator(), m, np.full(m.size, 0.4))
    assert np.all((0 <= y) & (y <= m))
