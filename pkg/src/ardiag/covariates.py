"""Residual-vs-covariate (local) and degree-vs-covariate (global) screens."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .core import ArdDataset, CovariateSpec
from .fit import FittedModel
from .residuals import ResidualMatrix

GLOBAL = "global"


@dataclass(frozen=True)
class SlopeScreen:
    covariate: str
    scope: object            # group index for local screens, "global" otherwise
    slope: float
    std_error: float
    t_value: float
    n_points: int
    quad_t: float = float("nan")
    x: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    y: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def is_local(self) -> bool:
        return self.scope != GLOBAL


@dataclass(frozen=True)
class CovariateSuggestion:
    local: frozenset
    global_: frozenset
    inert: frozenset
    threshold_used: float

    def as_spec(self, include_rg: bool = False) -> CovariateSpec:
        return CovariateSpec(global_=self.global_, local=self.local, include_rg=include_rg)

    def to_dict(self) -> dict:
        return {"local": sorted(self.local), "global": sorted(self.global_),
                "inert": sorted(self.inert), "threshold_used": self.threshold_used}


def _simple_ols(x: np.ndarray, Y: np.ndarray):
    """Regress every column of Y on (1, x). Returns slope, se, t per column."""
    n = x.shape[0]
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if Y.ndim == 1:
        Y = Y[:, None]
    if sxx == 0:
        m = Y.shape[1]
        return np.zeros(m), np.full(m, np.inf), np.zeros(m)
    Yc = Y - Y.mean(axis=0)
    slope = xc @ Yc / sxx
    rss = np.sum((Yc - np.outer(xc, slope)) ** 2, axis=0)
    se = np.sqrt(np.maximum(rss, 0) / (n - 2) / sxx)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, slope / se, np.where(slope == 0, 0.0, np.sign(slope) * np.inf))
    return slope, se, t


def _quad_t(x: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """t-value of the squared term in Y ~ 1 + x + x^2 (NaN when x^2 is collinear)."""
    if Y.ndim == 1:
        Y = Y[:, None]
    n = x.shape[0]
    xs = (x - x.mean()) / (x.std() or 1.0)
    X = np.column_stack([np.ones(n), xs, xs**2])
    if np.linalg.matrix_rank(X) < 3 or n <= 3:
        return np.full(Y.shape[1], np.nan)
    XtX_inv = np.linalg.inv(X.T @ X)
    coef = XtX_inv @ X.T @ Y
    rss = np.sum((Y - X @ coef) ** 2, axis=0)
    se = np.sqrt(rss / (n - 3) * XtX_inv[2, 2])
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(se > 0, coef[2] / se, np.nan)


def local_screen(residuals: ResidualMatrix, dataset: ArdDataset,
                 covariates: Optional[Iterable[str]] = None) -> list[SlopeScreen]:
    """Regress each group's residual column on each covariate."""
    R = residuals.values if isinstance(residuals, ResidualMatrix) else np.asarray(residuals)
    names = list(covariates) if covariates is not None else list(dataset.covariate_names)
    n = R.shape[0]
    if n < 3:
        raise ValueError("need at least 3 respondents to screen covariates")
    out = []
    for c in names:
        x = dataset.column(c)
        slope, se, t = _simple_ols(x, R)
        qt = _quad_t(x, R)
        for k in range(R.shape[1]):
            out.append(SlopeScreen(c, k, float(slope[k]), float(se[k]), float(t[k]), n,
                                   float(qt[k]), x, R[:, k]))
    return out


def respondent_effects(model: FittedModel, dataset: ArdDataset) -> np.ndarray:
    """Total log-degree alpha_i + g' z_i."""
    a = model.alpha.copy()
    if model.global_names:
        idx = [dataset.covariate_names.index(c) for c in model.global_names]
        a = a + dataset.covariates[:, idx] @ model.global_coef
    return a


def global_screen(model: FittedModel, dataset: ArdDataset,
                  exclude: Iterable[str] = ()) -> list[SlopeScreen]:
    """Regress the fitted log-degrees on each covariate not in ``exclude``.

    Respondents whose degree was clamped (all-zero rows) are left out.
    """
    exclude = set(exclude)
    keep = np.ones(dataset.n, dtype=bool)
    keep[list(model.clamped_respondents)] = False
    a = respondent_effects(model, dataset)[keep]
    out = []
    for c in dataset.covariate_names:
        if c in exclude:
            continue
        x = dataset.column(c)[keep]
        slope, se, t = _simple_ols(x, a)
        qt = _quad_t(x, a)
        out.append(SlopeScreen(c, GLOBAL, float(slope[0]), float(se[0]), float(t[0]),
                               int(keep.sum()), float(qt[0]), x, a))
    return out


def suggest_spec(local_screens: list[SlopeScreen], global_screens: list[SlopeScreen],
                 t_threshold: float = 4.0, local_fraction: float = 0.1) -> CovariateSuggestion:
    """Local if |t| >= threshold in at least ceil(local_fraction * K) groups;
    otherwise global if the degree screen has |t| >= threshold; otherwise inert."""
    names = list(dict.fromkeys([s.covariate for s in local_screens]
                               + [s.covariate for s in global_screens]))
    groups = {s.scope for s in local_screens}
    need = max(1, math.ceil(local_fraction * len(groups))) if groups else 1
    local, glob, inert = set(), set(), set()
    for c in names:
        hits = sum(1 for s in local_screens if s.covariate == c and abs(s.t_value) >= t_threshold)
        if groups and hits >= need:
            local.add(c)
            continue
        g = [s for s in global_screens if s.covariate == c]
        if g and abs(g[0].t_value) >= t_threshold:
            glob.add(c)
        else:
            inert.add(c)
    return CovariateSuggestion(frozenset(local), frozenset(glob), frozenset(inert),
                               float(t_threshold))


def screen_table(screens: list[SlopeScreen]) -> list[dict]:
    return [{"covariate": s.covariate, "group": s.scope, "slope": s.slope, "se": s.std_error,
             "t": s.t_value, "quad_t": s.quad_t, "n": s.n_points} for s in screens]
