import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, linalg

from ardiag.tracy_widom import (GRID_HI, GRID_LO, fredholm_log_cdf_sf, tw1_cdf, tw1_pdf,
                                tw1_ppf, tw1_sf)

# published beta = 1 percentiles (two-decimal tables)
PERCENTILES = [(0.01, -3.90), (0.05, -3.18), (0.10, -2.78), (0.30, -1.91), (0.50, -1.27),
               (0.70, -0.59), (0.90, 0.45), (0.95, 0.98), (0.99, 2.02)]


def test_upper_critical_values():
    assert 0.045 <= tw1_sf(0.9793) <= 0.055
    assert 0.008 <= tw1_sf(2.0234) <= 0.012
    assert tw1_ppf(0.95) == pytest.approx(0.9793, abs=2e-3)
    assert tw1_ppf(0.99) == pytest.approx(2.0234, abs=2e-3)


@pytest.mark.parametrize("q,x", PERCENTILES)
def test_published_percentiles(q, x):
    assert tw1_ppf(q) == pytest.approx(x, abs=0.011)


def test_limits():
    assert tw1_sf(-10) == pytest.approx(1.0, abs=1e-12)
    assert tw1_sf(8) < 1e-6
    assert tw1_sf(-50) == 1.0
    assert 0 <= tw1_sf(40) < 1e-30


@pytest.mark.parametrize("s", [-6.3, -2.05, 0.4, 3.7])
def test_grid_matches_direct_quadrature(s):
    log_cdf, log_sf = fredholm_log_cdf_sf(s)
    assert tw1_cdf(s) == pytest.approx(np.exp(log_cdf), abs=1e-7)
    assert tw1_sf(s) == pytest.approx(np.exp(log_sf), rel=1e-5, abs=1e-9)


def test_density_integrates_to_one():
    t = np.linspace(GRID_LO, GRID_HI, 20001)
    f = tw1_pdf(t)
    total = integrate.trapezoid(f, t)
    assert total == pytest.approx(1.0, abs=1e-4)
    mean = integrate.trapezoid(t * f, t)
    assert mean == pytest.approx(-1.2065, abs=2e-3)


@given(st.floats(-12, 12), st.floats(0, 5))
def test_sf_monotone(t, dt):
    assert tw1_sf(t + dt) <= tw1_sf(t) + 1e-15
    assert tw1_cdf(t) + tw1_sf(t) == pytest.approx(1.0, abs=1e-9)


def test_goe_monte_carlo_oracle():
    # scaled largest eigenvalue of GOE(N): (lambda_max - 2 sqrt N) N^(1/6) -> TW1
    rng = np.random.default_rng(2024)
    N, reps = 100, 2000
    stat = np.empty(reps)
    for r in range(reps):
        A = rng.standard_normal((N, N))
        H = (A + A.T) / np.sqrt(2)
        lam = linalg.eigh(H, eigvals_only=True, subset_by_index=[N - 1, N - 1])[0]
        stat[r] = (lam - 2 * np.sqrt(N)) * N ** (1 / 6)
    grid = np.linspace(-4, 2, 25)
    emp = np.array([(stat <= g).mean() for g in grid])
    assert np.max(np.abs(emp - tw1_cdf(grid))) < 0.06
