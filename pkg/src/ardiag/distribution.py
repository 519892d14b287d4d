"""Rootograms and per-group dispersion tests."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import stats

from . import families
from .core import ArdDataset
from .fit import FittedModel, _check_dims

HANGING, STANDING, SUSPENDED = "hanging", "standing", "suspended"
STYLES = (HANGING, STANDING, SUSPENDED)
OVERALL = "overall"
EXPECTED_MASS = 0.999


@dataclass(frozen=True)
class Rootogram:
    style: str
    scope: Union[str, int]
    support: np.ndarray
    obs: np.ndarray           # raw observed frequencies
    expc: np.ndarray          # raw expected frequencies
    bar_low: np.ndarray       # plotted extents on the square-root scale
    bar_high: np.ndarray
    tail_mass: float          # expected cells beyond support[-1]
    obs_tail: int             # observed cells beyond support[-1]
    n_cells: int

    @property
    def sqrt_obs(self) -> np.ndarray:
        return np.sqrt(self.obs)

    @property
    def sqrt_exp(self) -> np.ndarray:
        return np.sqrt(self.expc)

    @property
    def multiple_of_5(self) -> np.ndarray:
        return (self.support > 0) & (self.support % 5 == 0)

    def rows(self) -> list[dict]:
        return [{"j": int(j), "obs": float(o), "exp": float(e), "bar_low": float(lo),
                 "bar_high": float(hi), "is_multiple_of_5": bool(m)}
                for j, o, e, lo, hi, m in zip(self.support, self.obs, self.expc,
                                              self.bar_low, self.bar_high, self.multiple_of_5)]


def _omega_col(model: FittedModel, k: int):
    return None if model.family == families.POISSON else model.omega[k]


def _scope_groups(scope, K: int) -> list[int]:
    if scope == OVERALL:
        return list(range(K))
    k = int(scope)
    if not 0 <= k < K:
        raise IndexError(f"group index {k} out of range for K={K}")
    return [k]


def default_jmax(dataset: ArdDataset, model: FittedModel, groups: list[int]) -> int:
    """Smallest j with cumulative expected mass >= 99.9% of the cells, capped at max(y)."""
    y = dataset.y[:, groups]
    if y.size == 0:
        raise ValueError("empty rootogram scope")
    ymax = int(y.max())
    mu = model.mu_hat[:, groups]
    om = None if model.family == families.POISSON else np.broadcast_to(model.omega[groups], mu.shape)

    def mass(j):
        return float(np.mean(families.cdf(model.family, j, mu, om)))

    if mass(ymax) < EXPECTED_MASS:
        return ymax
    lo, hi = -1, ymax          # mass(lo) < target <= mass(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if mass(mid) >= EXPECTED_MASS:
            hi = mid
        else:
            lo = mid
    return hi


def _group_counts(dataset, model, k, j_max):
    support = np.arange(j_max + 1)
    y = dataset.y[:, k]
    obs = np.bincount(np.minimum(y, j_max + 1), minlength=j_max + 2)
    mu = model.mu_hat[:, k]
    om = _omega_col(model, k)
    pm = families.pmf(model.family, support[None, :], mu[:, None], om)
    expc = pm.sum(axis=0)
    tail = float(np.sum(families.sf(model.family, j_max, mu, om)))
    return obs[: j_max + 1].astype(float), expc, int(obs[j_max + 1]), tail


def _extents(style, obs, expc):
    so, se = np.sqrt(obs), np.sqrt(expc)
    if style == HANGING:
        return se - so, se
    if style == STANDING:
        return np.zeros_like(so), so
    return np.zeros_like(so), se - so


def rootogram(dataset: ArdDataset, model: FittedModel, style: str = HANGING,
              scope: Union[str, int] = OVERALL, j_max: Optional[int] = None) -> Rootogram:
    _check_dims(model, dataset)
    if style not in STYLES:
        raise ValueError(f"style must be one of {STYLES}")
    groups = _scope_groups(scope, dataset.K)
    if dataset.n == 0 or not groups:
        raise ValueError("empty rootogram scope")
    if j_max is None:
        j_max = default_jmax(dataset, model, groups)
    # overall = ordered sum of per-group frequencies
    obs = np.zeros(j_max + 1)
    expc = np.zeros(j_max + 1)
    obs_tail, tail = 0, 0.0
    for k in groups:
        o, e, ot, t = _group_counts(dataset, model, k, j_max)
        obs = obs + o
        expc = expc + e
        obs_tail += ot
        tail += t
    lo, hi = _extents(style, obs, expc)
    return Rootogram(style=style, scope=scope if scope == OVERALL else int(scope),
                     support=np.arange(j_max + 1), obs=obs, expc=expc, bar_low=lo,
                     bar_high=hi, tail_mass=tail, obs_tail=obs_tail,
                     n_cells=dataset.n * len(groups))


def rootogram_set(dataset: ArdDataset, model: FittedModel, style: str = HANGING,
                  j_max: Optional[int] = None) -> dict:
    """Overall plus one rootogram per group, all on the overall support."""
    if j_max is None:
        j_max = default_jmax(dataset, model, list(range(dataset.K)))
    out = {OVERALL: rootogram(dataset, model, style, OVERALL, j_max)}
    for k in range(dataset.K):
        out[k] = rootogram(dataset, model, style, k, j_max)
    return out


# -------------------------------------------------------------- dispersion

@dataclass(frozen=True)
class DispersionResult:
    group: int
    name: str
    D: float
    dof: int
    ratio: float
    p_value: float
    p_normal: float

    def to_dict(self) -> dict:
        return {"group": self.name, "index": self.group, "D": self.D, "dof": self.dof,
                "ratio": self.ratio, "p_chisq": self.p_value, "p_normal": self.p_normal}


def dispersion_dof(n: int, K: int, n_local_params: int = 0) -> int:
    """n minus the group's own coefficients and its share of the respondent effects."""
    return max(1, n - (1 + n_local_params) - round(n / K))


def dispersion_index(dataset: ArdDataset, model: FittedModel, group: int,
                     include_ybar_prefactor: bool = False,
                     dof: Optional[int] = None) -> DispersionResult:
    _check_dims(model, dataset)
    if model.family != families.POISSON:
        raise ValueError("the dispersion index is defined relative to a Poisson fit")
    if not 0 <= group < dataset.K:
        raise IndexError(f"group index {group} out of range for K={dataset.K}")
    y = dataset.y[:, group].astype(float)
    lam = model.mu_hat[:, group]
    if np.any(~(lam > 0)):
        raise ValueError("fitted means must be positive")
    D = float(np.sum((y - lam) ** 2 / lam))
    if include_ybar_prefactor:
        ybar = y.mean()
        if ybar == 0:
            raise ValueError("group has no positive responses; 1/ybar undefined")
        D = D / ybar
    if dof is None:
        dof = dispersion_dof(dataset.n, dataset.K, model.n_local_params)
    aux = ((y - lam) ** 2 - y) / lam
    se = aux.std(ddof=1) / np.sqrt(len(aux))
    p_normal = float(stats.t.sf(aux.mean() / se, len(aux) - 1)) if se > 0 else float("nan")
    return DispersionResult(group=group, name=dataset.group_names[group], D=D, dof=int(dof),
                            ratio=D / dof, p_value=float(stats.chi2.sf(D, dof)),
                            p_normal=p_normal)


def dispersion_panel(dataset: ArdDataset, model: FittedModel,
                     include_ybar_prefactor: bool = False) -> list[DispersionResult]:
    return [dispersion_index(dataset, model, k, include_ybar_prefactor)
            for k in range(dataset.K)]
