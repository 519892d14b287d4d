"""Poisson and NB2 count kernels.

The negative binomial uses the mean/size parameterisation: variance is
``mu + mu**2 / omega`` and ``omega -> inf`` recovers the Poisson.
"""
from __future__ import annotations

import numpy as np
from scipy import special, stats

POISSON = "poisson"
NEGBIN = "negbin"
FAMILIES = (POISSON, NEGBIN)


def check_family(family: str) -> str:
    f = str(family).lower()
    aliases = {"nb": NEGBIN, "negbinomial": NEGBIN, "negative_binomial": NEGBIN,
               "negative-binomial": NEGBIN}
    f = aliases.get(f, f)
    if f not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    return f


def _lgamma_ratio(y, omega):
    # lgamma(y + omega) - lgamma(omega) - y*log(omega), stable for huge omega
    y = np.asarray(y, dtype=float)
    omega = np.asarray(omega, dtype=float)
    y, omega = np.broadcast_arrays(y, omega)
    out = np.empty(y.shape)
    big = omega > 1e3 * (y + 1.0) ** 2
    yb, ob = y[big], omega[big]
    out[big] = yb * (yb - 1) / (2 * ob) - (yb - 1) * yb * (2 * yb - 1) / (12 * ob**2)
    # gammaln differences cancel badly once omega is large; use the Stirling form
    # (x - 1/2) log x - x + s(x) with the correction series s
    mid = ~big & (omega > 50)
    ym, om = y[mid], omega[mid]
    out[mid] = (om + ym - 0.5) * np.log1p(ym / om) - ym + _stirling(om + ym) - _stirling(om)
    rest = ~big & ~mid
    ys, os_ = y[rest], omega[rest]
    out[rest] = special.gammaln(ys + os_) - special.gammaln(os_) - ys * np.log(os_)
    return out


def _stirling(x):
    x2 = 1.0 / (x * x)
    return (1.0 / 12 - x2 * (1.0 / 360 - x2 * (1.0 / 1260 - x2 / 1680))) / x


def logpmf(family: str, y, mu, omega=None):
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if family == POISSON:
        return special.xlogy(y, mu) - mu - special.gammaln(y + 1)
    omega = np.asarray(omega, dtype=float)
    r = mu / omega
    return (_lgamma_ratio(y, omega) - special.gammaln(y + 1)
            - (omega + y) * np.log1p(r) + special.xlogy(y, mu))


def pmf(family: str, y, mu, omega=None):
    return np.exp(logpmf(family, y, mu, omega))


def cdf(family: str, y, mu, omega=None):
    """P(Y <= y); zero for y < 0."""
    y = np.asarray(y, dtype=float)
    if family == POISSON:
        return stats.poisson.cdf(y, mu)
    omega = np.asarray(omega, dtype=float)
    return stats.nbinom.cdf(y, omega, omega / (omega + mu))


def sf(family: str, y, mu, omega=None):
    """P(Y > y); one for y < 0."""
    y = np.asarray(y, dtype=float)
    if family == POISSON:
        return stats.poisson.sf(y, mu)
    omega = np.asarray(omega, dtype=float)
    return stats.nbinom.sf(y, omega, omega / (omega + mu))


def variance(family: str, mu, omega=None):
    mu = np.asarray(mu, dtype=float)
    if family == POISSON:
        return mu
    return mu + mu**2 / np.asarray(omega, dtype=float)


def eta_derivs(family: str, y, mu, omega=None):
    """Score and negative Hessian of the cell log-likelihood in eta = log(mu).

    Both families are concave in eta, so the returned curvature is positive.
    """
    if family == POISSON:
        return y - mu, mu
    a = omega + mu
    return omega * (y - mu) / a, omega * mu * (omega + y) / a**2


def omega_derivs(y, mu, omega):
    """First and second derivatives of the NB2 log-likelihood in omega."""
    a = omega + mu
    g = (special.digamma(y + omega) - special.digamma(omega)
         - np.log1p(mu / omega) + (mu - y) / a)
    h = (special.polygamma(1, y + omega) - special.polygamma(1, omega)
         + 1.0 / omega - 1.0 / a - (mu - y) / a**2)
    return g, h


def count_cdf(family: str, y: int, mu: float, omega: float | None = None) -> float:
    """Scalar CDF with parameter checks."""
    family = check_family(family)
    if y < -1 or int(y) != y:
        raise ValueError("y must be an integer >= -1")
    if not mu > 0:
        raise ValueError("mu must be positive")
    if family == NEGBIN and (omega is None or not omega > 0):
        raise ValueError("omega must be positive for the negative binomial")
    if y < 0:
        return 0.0
    return float(cdf(family, y, mu, omega))
