from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, optimize, special, stats

from cvqdc.gauss_num import (
    RngStream,
    binary_entropy,
    chi2_cdf,
    chi2_isf,
    chi2_quantile,
    chi2_sf,
    gaussian_cdf,
    gaussian_interval_prob,
    gaussian_pdf,
    regularized_lower_gamma,
    regularized_upper_gamma,
    sample_gaussian,
)

# --- independent oracles ----------------------------------------------------


def quad_interval(a, b, variance):
    f = lambda x: math.exp(-x * x / (2 * variance)) / math.sqrt(2 * math.pi * variance)
    return integrate.quad(f, a, b, epsabs=1e-15, epsrel=1e-13)[0]


def lower_gamma_series(a, x, terms=400):
    """P(a, x) = x^a e^-x / Gamma(a+1) * sum_k x^k / ((a+1)...(a+k)), in high precision."""
    with mpmath.workdps(40):
        a, x = mpmath.mpf(a), mpmath.mpf(x)
        term = mpmath.mpf(1)
        total = term
        for k in range(1, terms):
            term *= x / (a + k)
            total += term
        return float(total * mpmath.exp(a * mpmath.log(x) - x - mpmath.loggamma(a + 1)))


def lower_gamma_integer(M, x):
    """For integer M: P(M, x) = 1 - e^-x sum_{k<M} x^k / k!."""
    return 1.0 - math.exp(-x) * math.fsum(x**k / math.factorial(k) for k in range(M))


def chi2_quantile_by_inversion(dof, prob):
    return optimize.brentq(lambda v: special.gammainc(dof / 2, v / 2) - prob, 0.0, 10.0 * dof + 200.0, xtol=1e-14, rtol=1e-15)


# --- Gaussian marginal ------------------------------------------------------


def test_interval_prob_standard_normal_example():
    frozen = 0.15730535589982697  # Phi(3) - Phi(1), from scipy.stats.norm
    assert frozen == pytest.approx(stats.norm.cdf(3) - stats.norm.cdf(1), rel=1e-14)
    assert gaussian_interval_prob(1.0, 3.0, 1.0) == pytest.approx(frozen, rel=1e-13)
    assert gaussian_interval_prob(1.0, 3.0, 1.0) == pytest.approx(quad_interval(1, 3, 1), rel=1e-12)


def test_interval_prob_whole_line_and_half_line():
    assert gaussian_interval_prob(-math.inf, math.inf, 2.5) == 1.0
    assert gaussian_interval_prob(0.0, math.inf, 0.3) == pytest.approx(0.5, abs=1e-16)


def test_interval_prob_far_tail_keeps_relative_accuracy():
    # both ends deep in the tail: naive cdf differences would return 0
    got = gaussian_interval_prob(20.0, 21.0, 1.0)
    with mpmath.workdps(30):
        want = float(mpmath.ncdf(21) - mpmath.ncdf(20))
    assert got == pytest.approx(want, rel=1e-12)


def test_interval_prob_rejects_bad_input():
    with pytest.raises(ValueError):
        gaussian_interval_prob(2.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        gaussian_interval_prob(0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        gaussian_interval_prob(0.0, 1.0, -1.0)


@given(
    a=st.floats(-8, 8),
    w1=st.floats(0, 5),
    w2=st.floats(0, 5),
    var=st.floats(0.05, 20),
)
def test_interval_prob_is_additive(a, w1, w2, var):
    b, c = a + w1, a + w1 + w2
    whole = gaussian_interval_prob(a, c, var)
    parts = gaussian_interval_prob(a, b, var) + gaussian_interval_prob(b, c, var)
    assert whole == pytest.approx(parts, abs=1e-14)


@given(a=st.floats(-8, 8), w=st.floats(0, 8), var=st.floats(0.05, 20))
def test_interval_prob_is_symmetric_and_bounded(a, w, var):
    b = a + w
    p = gaussian_interval_prob(a, b, var)
    assert 0.0 <= p <= 1.0
    assert p == pytest.approx(gaussian_interval_prob(-b, -a, var), abs=1e-15)


def test_pdf_and_cdf_against_scipy():
    for x in (-3.0, -0.2, 0.0, 1.7):
        assert gaussian_pdf(x, 0.5, 2.0) == pytest.approx(stats.norm.pdf(x, 0.5, math.sqrt(2.0)), rel=1e-14)
        assert gaussian_cdf(x, 2.0) == pytest.approx(stats.norm.cdf(x, 0, math.sqrt(2.0)), rel=1e-14)


# --- sampling ---------------------------------------------------------------


def test_sample_gaussian_zero_variance_returns_mean():
    rng = RngStream(1)
    assert sample_gaussian(3.25, 0.0, rng) == 3.25


def test_sample_gaussian_moments_over_a_million_draws():
    rng = RngStream(7, 3)
    x = np.array([sample_gaussian(0.0, 1.0, rng) for _ in range(200_000)])
    x = np.concatenate([x, rng.normal(0.0, 1.0, 800_000)])
    assert abs(x.mean()) < 3e-3
    assert abs(x.var() - 1.0) < 5e-3


def test_samples_pass_kolmogorov_smirnov():
    rng = RngStream(11, 0)
    x = rng.normal(2.0, 3.0, 100_000)
    assert stats.kstest(x, "norm", args=(2.0, 3.0)).pvalue > 0.01


def test_streams_are_deterministic_and_distinct():
    a = RngStream(5, 9).normal(0, 1, 8)
    b = RngStream(5, 9).normal(0, 1, 8)
    c = RngStream(5, 10).normal(0, 1, 8)
    d = RngStream(6, 9).normal(0, 1, 8)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)
    assert RngStream(5, 0).derive(9).normal(0, 1, 8).tolist() == a.tolist()


def test_stream_ids_must_fit_64_bits():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(0, 2**64)


def test_bits_are_fair():
    bits = RngStream(3).bits(200_000)
    assert set(np.unique(bits)) == {0, 1}
    assert abs(bits.mean() - 0.5) < 3 * 0.5 / math.sqrt(bits.size)


# --- incomplete gamma -------------------------------------------------------


def test_lower_gamma_shape_one_is_exponential_cdf():
    for x in (0.0, 1e-8, 0.3, 1.0, 5.0, 40.0):
        assert regularized_lower_gamma(1, x) == pytest.approx(-math.expm1(-x), rel=1e-14, abs=1e-300)


def test_lower_gamma_at_zero():
    for M in (1, 3, 1000):
        assert regularized_lower_gamma(M, 0.0) == 0.0
        assert regularized_upper_gamma(M, 0.0) == 1.0


def test_lower_gamma_frozen_example():
    frozen = 0.46789642362528544  # P(5, 4.5)
    assert lower_gamma_series(5, 4.5) == pytest.approx(frozen, rel=1e-15)
    assert lower_gamma_integer(5, 4.5) == pytest.approx(frozen, rel=1e-14)
    assert regularized_lower_gamma(5, 4.5) == pytest.approx(frozen, rel=1e-14)


@pytest.mark.parametrize("M", [1, 2, 3, 5, 8, 13, 20])
def test_lower_gamma_matches_poisson_sum_for_integer_shape(M):
    for x in np.linspace(0.05, 3 * M + 10, 25):
        assert regularized_lower_gamma(M, x) == pytest.approx(lower_gamma_integer(M, x), rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("a", [0.5, 2.5, 10, 47.5, 300, 3000])
def test_lower_gamma_against_mpmath(a):
    for x in (0.5 * a, a - 3 * math.sqrt(a), a, a + 3 * math.sqrt(a), 1.5 * a + 5):
        if x <= 0:
            continue
        with mpmath.workdps(30):
            p = mpmath.gammainc(a, 0, x, regularized=True)
            q = mpmath.gammainc(a, x, mpmath.inf, regularized=True)
        assert regularized_lower_gamma(a, x) == pytest.approx(float(p), rel=1e-11, abs=1e-300)
        assert regularized_upper_gamma(a, x) == pytest.approx(float(q), rel=1e-11, abs=1e-300)


@pytest.mark.parametrize("a", [1e4, 1e5, 1e6, 5e7])
def test_lower_gamma_large_shape_against_scipy(a):
    for x in (a - 3 * math.sqrt(a), a, a + 3 * math.sqrt(a), a + 6 * math.sqrt(a)):
        assert regularized_lower_gamma(a, x) == pytest.approx(special.gammainc(a, x), rel=1e-10)
        assert regularized_upper_gamma(a, x) == pytest.approx(special.gammaincc(a, x), rel=1e-10)


def test_lower_gamma_agrees_with_scipy_on_a_grid():
    for a in (0.7, 3, 30, 3e3, 3e5):
        for x in np.linspace(0.01, 3 * a, 17):
            assert regularized_lower_gamma(a, x) == pytest.approx(special.gammainc(a, x), rel=1e-11, abs=1e-15)


@given(a=st.floats(0.5, 1e4), u=st.floats(0.01, 3.0))
def test_lower_plus_upper_is_one(a, u):
    x = u * a
    assert regularized_lower_gamma(a, x) + regularized_upper_gamma(a, x) == pytest.approx(1.0, abs=1e-13)


@given(a=st.floats(0.5, 1e4), u=st.floats(0.01, 3.0), du=st.floats(0.001, 1.0))
def test_lower_gamma_monotone_in_x(a, u, du):
    assert regularized_lower_gamma(a, u * a) <= regularized_lower_gamma(a, (u + du) * a)


def test_lower_gamma_rejects_bad_arguments():
    with pytest.raises(ValueError):
        regularized_lower_gamma(0, 1.0)
    with pytest.raises(ValueError):
        regularized_lower_gamma(2, -1.0)


# --- chi-squared quantile ---------------------------------------------------


def test_chi2_quantile_two_dof_closed_form():
    for prob in (0.01, 0.5, 0.95, 1 - 5e-7):
        assert chi2_quantile(2, prob) == pytest.approx(-2 * math.log1p(-prob), rel=1e-12)


def test_chi2_quantile_frozen_examples():
    assert chi2_quantile(2, 0.95) == pytest.approx(5.99146454710798, rel=1e-13)
    assert chi2_isf(2, 5e-7) == pytest.approx(29.017315477048438, rel=1e-13)
    assert chi2_quantile_by_inversion(2, 0.95) == pytest.approx(5.99146454710798, rel=1e-12)


@pytest.mark.parametrize("dof", [1, 2, 5, 20, 200, 2000, 20_000, 200_000, 2_000_000])
@pytest.mark.parametrize("tail", [0.5, 0.05, 1e-3, 5e-7])
def test_chi2_isf_against_scipy(dof, tail):
    assert chi2_isf(dof, tail) == pytest.approx(stats.chi2.isf(tail, dof), rel=1e-11)


@pytest.mark.parametrize("dof", [4, 30, 400])
def test_chi2_quantile_against_root_finding(dof):
    for prob in (0.1, 0.5, 0.9, 0.999):
        assert chi2_quantile(dof, prob) == pytest.approx(chi2_quantile_by_inversion(dof, prob), rel=1e-11)


@given(dof=st.integers(1, 10_000), prob=st.floats(1e-6, 1 - 1e-6))
def test_chi2_quantile_round_trips(dof, prob):
    v = chi2_quantile(dof, prob)
    assert chi2_cdf(dof, v) == pytest.approx(prob, rel=1e-9, abs=1e-12)
    assert chi2_sf(dof, v) == pytest.approx(1 - prob, rel=1e-9, abs=1e-12)


@given(dof=st.integers(1, 10_000), p1=st.floats(1e-6, 1 - 1e-6), p2=st.floats(1e-6, 1 - 1e-6))
def test_chi2_quantile_monotone_in_prob(dof, p1, p2):
    lo, hi = sorted((p1, p2))
    assert chi2_quantile(dof, lo) <= chi2_quantile(dof, hi)


@given(dof=st.integers(1, 10_000), prob=st.floats(0.5, 1 - 1e-7))
def test_chi2_quantile_monotone_in_dof(dof, prob):
    assert chi2_quantile(dof, prob) < chi2_quantile(dof + 1, prob)


def test_chi2_rejects_bad_arguments():
    for bad in ((0, 0.5), (2.5, 0.5), (2, 0.0), (2, 1.0)):
        with pytest.raises(ValueError):
            chi2_quantile(*bad)
        with pytest.raises(ValueError):
            chi2_isf(*bad)


# --- entropy ----------------------------------------------------------------


def test_binary_entropy_examples():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == 1.0
    with mpmath.workdps(30):
        p = mpmath.mpf("0.11")
        want = float(-p * mpmath.log(p, 2) - (1 - p) * mpmath.log(1 - p, 2))
    assert binary_entropy(0.11) == pytest.approx(want, rel=1e-14)
    assert binary_entropy(0.11) == pytest.approx(0.49991596, abs=1e-8)


@given(p=st.floats(0, 1))
def test_binary_entropy_symmetric_and_bounded(p):
    h = binary_entropy(p)
    assert 0.0 <= h <= 1.0
    # 1 - p rounds, but q and 1 - q are exact complements
    q = 1 - p
    assert binary_entropy(q) == pytest.approx(binary_entropy(1 - q), abs=1e-15)


def test_binary_entropy_rejects_out_of_range():
    for bad in (-0.1, 1.1, math.nan):
        with pytest.raises(ValueError):
            binary_entropy(bad)
