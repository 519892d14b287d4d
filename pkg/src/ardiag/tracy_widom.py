"""Tracy-Widom (beta = 1) distribution.

``tw1_sf`` interpolates a bundled grid of log-CDF / log-survival values on
[-10, 8].  The grid is produced by ``scripts/build_tw1_grid.py`` from the
Fredholm determinant representation

    F1(s) = det(I - K_s),   K_s(x, y) = Ai(s + (x + y) / 2) / 2   on L2(0, inf)

discretised with Gauss-Legendre quadrature.
"""
from __future__ import annotations

from functools import lru_cache
from importlib import resources

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import PchipInterpolator
from scipy.special import airy

GRID_LO, GRID_HI, GRID_POINTS = -10.0, 8.0, 1801
MEDIAN = -1.2686


def fredholm_log_cdf_sf(s: float, nodes: int = 200) -> tuple[float, float]:
    """(log F1(s), log(1 - F1(s))) by quadrature of the Airy-kernel determinant."""
    length = 14.0 + max(0.0, -s) * 1.6
    x, w = leggauss(nodes)
    u = (x + 1) * length / 2
    w = w * length / 2
    kern = 0.5 * airy(s + (u[:, None] + u[None, :]) / 2)[0]
    sw = np.sqrt(w)
    ev = np.linalg.eigvalsh(sw[:, None] * kern * sw[None, :])
    log_cdf = float(np.sum(np.log1p(-np.clip(ev, None, 1 - 1e-300))))
    log_sf = float(np.log(-np.expm1(log_cdf))) if log_cdf < 0 else -np.inf
    return log_cdf, log_sf


@lru_cache(maxsize=1)
def _grid():
    ref = resources.files("ardiag") / "data" / "tw1_grid.csv"
    with ref.open("r") as fh:
        data = np.loadtxt(fh, delimiter=",", skiprows=1)
    s, log_cdf, log_sf = data.T
    return (s, PchipInterpolator(s, log_cdf, extrapolate=False),
            PchipInterpolator(s, log_sf, extrapolate=False), log_cdf, log_sf)


def tw1_logsf(t):
    s, f_cdf, f_sf, log_cdf, log_sf = _grid()
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape)
    hi = t > GRID_HI
    lo = t < GRID_LO
    mid = ~(hi | lo)
    right = mid & (t >= MEDIAN)
    left = mid & (t < MEDIAN)
    out[right] = f_sf(t[right])
    out[left] = np.log(-np.expm1(f_cdf(t[left])))
    # right tail: log(1 - F1) ~ -(2/3) t^{3/2}
    out[hi] = log_sf[-1] - (2.0 / 3.0) * (t[hi] ** 1.5 - GRID_HI ** 1.5)
    out[lo] = 0.0
    return out


def tw1_sf(t):
    """Survival function 1 - F_TW1(t)."""
    out = np.exp(tw1_logsf(t))
    return float(out) if out.ndim == 0 else out


def tw1_cdf(t):
    s, f_cdf, f_sf, log_cdf, log_sf = _grid()
    t = np.asarray(t, dtype=float)
    out = np.where(t < MEDIAN, 0.0, 1.0 - np.exp(tw1_logsf(t)))
    left = (t < MEDIAN) & (t >= GRID_LO)
    out = np.where(left, np.exp(f_cdf(np.clip(t, GRID_LO, GRID_HI))), out)
    out = np.where(t < GRID_LO, np.exp(log_cdf[0] - (np.abs(t) ** 3 - abs(GRID_LO) ** 3) / 24), out)
    return float(out) if out.ndim == 0 else out


def tw1_ppf(q: float) -> float:
    """Quantile by bisection on the interpolated CDF."""
    if not 0 < q < 1:
        raise ValueError("q must be in (0, 1)")
    lo, hi = GRID_LO, GRID_HI
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if tw1_cdf(mid) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def tw1_pdf(t):
    """Density from the derivative of the interpolated log-CDF."""
    s, f_cdf, f_sf, log_cdf, log_sf = _grid()
    t = np.clip(np.asarray(t, dtype=float), GRID_LO, GRID_HI)
    return np.exp(f_cdf(t)) * f_cdf.derivative()(t)
