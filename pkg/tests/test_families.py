import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from ardiag import families
from ardiag.families import NEGBIN, POISSON, count_cdf

mus = st.floats(0.01, 50)
omegas = st.floats(0.05, 1e4)


def test_count_cdf_examples():
    assert count_cdf(POISSON, 0, 1.0) == pytest.approx(math.exp(-1), abs=1e-12)
    assert count_cdf(NEGBIN, 0, 1.0, 1.0) == pytest.approx(0.5, abs=1e-12)
    assert count_cdf(POISSON, -1, 3.0) == 0.0
    assert count_cdf(NEGBIN, -1, 3.0, 2.0) == 0.0


def test_count_cdf_rejects_bad_parameters():
    with pytest.raises(ValueError):
        count_cdf(POISSON, 1, 0.0)
    with pytest.raises(ValueError):
        count_cdf(NEGBIN, 1, 1.0)
    with pytest.raises(ValueError):
        count_cdf("binomial", 1, 1.0)


def test_poisson_logpmf_values():
    assert families.logpmf(POISSON, 0, 1.0) == pytest.approx(-1.0)
    assert families.logpmf(POISSON, 2, 2.0) == pytest.approx(math.log(2) - 2, abs=1e-12)


@given(st.integers(0, 40), mus, omegas)
def test_cdf_differences_equal_pmf(y, mu, om):
    for fam, w in ((POISSON, None), (NEGBIN, om)):
        diff = count_cdf(fam, y, mu, w) - count_cdf(fam, y - 1, mu, w)
        assert diff == pytest.approx(float(families.pmf(fam, y, mu, w)), abs=1e-12)
        assert count_cdf(fam, y + 1, mu, w) >= count_cdf(fam, y, mu, w)


@given(st.integers(0, 60), mus, omegas)
def test_nb_logpmf_matches_scipy(y, mu, om):
    ref = stats.nbinom.logpmf(y, om, om / (om + mu))
    assert families.logpmf(NEGBIN, y, mu, om) == pytest.approx(ref, rel=1e-9, abs=1e-9)


@given(st.integers(0, 20), st.floats(0.05, 20))
def test_nb_large_omega_is_poisson(y, mu):
    a = families.logpmf(NEGBIN, y, mu, 1e8)
    b = families.logpmf(POISSON, y, mu)
    assert abs(a - b) < 1e-4


@given(st.integers(0, 30), st.floats(0.1, 30), st.floats(0.1, 100))
def test_eta_derivs_match_finite_differences(y, mu, om):
    h = 1e-5
    for fam, w in ((POISSON, None), (NEGBIN, om)):
        g, c = families.eta_derivs(fam, y, mu, w)
        f = lambda e: float(families.logpmf(fam, y, math.exp(e), w))
        e = math.log(mu)
        assert g == pytest.approx((f(e + h) - f(e - h)) / (2 * h), rel=1e-4, abs=1e-6)
        h2 = 1e-3
        assert -c == pytest.approx((f(e + h2) - 2 * f(e) + f(e - h2)) / h2**2, rel=1e-3, abs=1e-4)


@given(st.integers(0, 30), st.floats(0.1, 30), st.floats(0.2, 50))
def test_omega_derivs_match_finite_differences(y, mu, om):
    h = 1e-4 * om
    f = lambda w: float(families.logpmf(NEGBIN, y, mu, w))
    g, H = families.omega_derivs(y, mu, om)
    assert g == pytest.approx((f(om + h) - f(om - h)) / (2 * h), rel=1e-4, abs=1e-7)
    assert H == pytest.approx((f(om + h) - 2 * f(om) + f(om - h)) / h**2, rel=1e-2, abs=1e-5)


def test_pmf_sums_to_one():
    j = np.arange(400)
    for fam, w in ((POISSON, None), (NEGBIN, 0.7)):
        assert families.pmf(fam, j, 6.0, w).sum() == pytest.approx(1.0, abs=1e-10)
        assert families.cdf(fam, 10, 6.0, w) + families.sf(fam, 10, 6.0, w) == pytest.approx(1.0)


def test_variance():
    assert families.variance(NEGBIN, 4.0, 1.0) == 20.0
    assert families.variance(POISSON, 4.0) == 4.0
