"""Largest-eigenvalue test for residual correlation between groups."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .residuals import RQR, ResidualMatrix
from .tracy_widom import tw1_sf

NONE = "none"
HALF = "half"


@dataclass(frozen=True)
class TwConstants:
    mu_n: float
    sigma_n: float
    correction: str


@dataclass(frozen=True)
class TwTestResult:
    lambda1: float
    statistic: float
    p_value: float
    constants: TwConstants
    n: int
    K: int
    alpha: float = 0.05
    spectrum: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def reject(self) -> bool:
        return self.p_value < self.alpha

    @property
    def reject_at_05(self) -> bool:
        return self.p_value < 0.05

    def to_dict(self) -> dict:
        return {"lambda1": self.lambda1, "T": self.statistic, "p_value": self.p_value,
                "correction": self.constants.correction, "mu_n": self.constants.mu_n,
                "sigma_n": self.constants.sigma_n, "n": self.n, "K": self.K,
                "alpha": self.alpha, "reject": self.reject,
                "spectrum": [float(v) for v in self.spectrum]}

    def to_json(self, path=None) -> str:
        s = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(s)
        return s


def check_correction(correction: str) -> str:
    c = str(correction).lower()
    if c in ("1/2", "0.5"):
        c = HALF
    if c not in (NONE, HALF):
        raise ValueError(f"correction must be 'none' or 'half', got {correction!r}")
    return c


def tw_constants(n: int, K: int, correction: str = HALF) -> TwConstants:
    correction = check_correction(correction)
    if n < 2 or K < 1:
        raise ValueError("need n >= 2 and K >= 1")
    a, b = (n - 1.0, float(K)) if correction == NONE else (n - 0.5, K - 0.5)
    root = sqrt(a) + sqrt(b)
    return TwConstants(mu_n=root**2, sigma_n=root * (1 / sqrt(a) + 1 / sqrt(b)) ** (1 / 3),
                       correction=correction)


def _as_matrix(residuals) -> np.ndarray:
    if isinstance(residuals, ResidualMatrix):
        if residuals.kind != RQR:
            raise ValueError("the correlation test needs randomized quantile residuals")
        return residuals.values
    return np.asarray(residuals, dtype=float)


def tw_statistic(residuals, correction: str = HALF) -> TwTestResult:
    """Largest eigenvalue of S = R'R/(n-1), centred and scaled on the R'R scale.

    Returned with ``p_value`` set to NaN; see ``tw_test``.
    """
    R = _as_matrix(residuals)
    n, K = R.shape
    if n <= K:
        raise ValueError(f"need more respondents than groups (n={n}, K={K})")
    if not np.all(np.isfinite(R)):
        raise ValueError("residuals must be finite")
    S = R.T @ R / (n - 1)
    spectrum = np.linalg.eigvalsh(S)[::-1]
    lam = float(spectrum[0])
    const = tw_constants(n, K, correction)
    T = ((n - 1) * lam - const.mu_n) / const.sigma_n
    return TwTestResult(lambda1=lam, statistic=float(T), p_value=float("nan"),
                        constants=const, n=n, K=K, spectrum=spectrum)


def tw_test(residuals, alpha: float = 0.05, correction: str = HALF) -> TwTestResult:
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    r = tw_statistic(residuals, correction)
    return TwTestResult(lambda1=r.lambda1, statistic=r.statistic,
                        p_value=float(tw1_sf(r.statistic)), constants=r.constants,
                        n=r.n, K=r.K, alpha=alpha, spectrum=r.spectrum)
