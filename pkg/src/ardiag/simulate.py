"""Synthetic ARD with known ground truth.

Covers the Binomial, Poisson and negative binomial count models and the
group-correlated / degree-correlated random-effect structures.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import families
from .core import ArdDataset

BINOMIAL = "binomial"
SIM_FAMILIES = (BINOMIAL, families.POISSON, families.NEGBIN)
NONE, GROUP, DEGREE = "none", "group", "degree"
MU_CAP = 1e9

# preset magnitudes
COEF = 0.5
RE_VAR = 0.25
RE_CORR = 0.5
DEGREE_CORR = 0.5
ALPHA_MEAN = float(np.log(300.0))
ALPHA_SD = 0.5
COUNT_RANGE = (0.5, 8.0)


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) % 2**64))


def replicate_seed(base_seed: int, replicate: int) -> int:
    ss = np.random.SeedSequence([int(base_seed) % 2**63, int(replicate)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def default_beta(K: int, alpha_mean: float = ALPHA_MEAN) -> np.ndarray:
    """Group intercepts giving mean counts log-spaced over COUNT_RANGE."""
    lo, hi = np.log(COUNT_RANGE[0]), np.log(COUNT_RANGE[1])
    return np.linspace(lo, hi, K) - alpha_mean


def contrast_pattern(K: int) -> np.ndarray:
    """+1 for the first half of the groups, -1 for the rest."""
    v = np.ones(K)
    v[K // 2:] = -1.0
    return v


def group_sigma(K: int, var: float = RE_VAR, corr: float = RE_CORR) -> np.ndarray:
    v = contrast_pattern(K)
    return var * (corr * np.outer(v, v) + (1 - corr) * np.eye(K))


def degree_sigma(K: int, alpha_sd: float = ALPHA_SD, var: float = RE_VAR,
                 corr: float = RE_CORR, degree_corr: float = DEGREE_CORR) -> np.ndarray:
    S = np.empty((K + 1, K + 1))
    S[1:, 1:] = group_sigma(K, var, corr)
    S[0, 0] = alpha_sd**2
    cross = degree_corr * alpha_sd * np.sqrt(var) * contrast_pattern(K)
    S[0, 1:] = cross
    S[1:, 0] = cross
    return S


@dataclass(frozen=True)
class SimulationSpec:
    n: int
    K: int
    family: str = families.POISSON
    correlation: str = NONE
    p_total: int = 0
    local_coef: dict = field(default_factory=dict)     # 1-based column -> (K,) slopes
    global_coef: dict = field(default_factory=dict)    # 1-based column -> slope
    alpha_mean: float = ALPHA_MEAN
    alpha_sd: float = ALPHA_SD
    beta: Optional[np.ndarray] = None
    omega: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None
    binary_columns: Optional[frozenset] = None         # default: even-numbered columns
    seed: int = 0
    name: str = "custom"

    def __post_init__(self):
        if self.family not in SIM_FAMILIES:
            raise ValueError(f"family must be one of {SIM_FAMILIES}")
        if self.correlation not in (NONE, GROUP, DEGREE):
            raise ValueError("correlation must be none, group or degree")
        if self.n < 2 or self.K < 1:
            raise ValueError("need n >= 2 and K >= 1")
        beta = default_beta(self.K, self.alpha_mean) if self.beta is None else np.asarray(self.beta, float)
        if beta.shape != (self.K,):
            raise ValueError("beta must have length K")
        object.__setattr__(self, "beta", beta)
        if set(self.local_coef) & set(self.global_coef):
            raise ValueError("active local and global sets must be disjoint")
        for c in list(self.local_coef) + list(self.global_coef):
            if not 1 <= c <= self.p_total:
                raise ValueError(f"active column {c} outside 1..{self.p_total}")
        object.__setattr__(self, "local_coef",
                           {int(c): np.broadcast_to(np.asarray(v, float), (self.K,)).copy()
                            for c, v in self.local_coef.items()})
        if self.family == families.NEGBIN:
            if self.omega is None:
                raise ValueError("negative binomial simulation needs omega")
            om = np.broadcast_to(np.asarray(self.omega, float), (self.K,)).copy()
            if np.any(~(om > 0)):
                raise ValueError("omega entries must be positive")
            object.__setattr__(self, "omega", om)
        if self.correlation != NONE:
            dim = self.K + (self.correlation == DEGREE)
            if self.sigma is None:
                raise ValueError("correlated simulation needs sigma")
            S = np.asarray(self.sigma, float)
            if S.shape != (dim, dim):
                raise ValueError(f"sigma must be {dim}x{dim}")
            if not np.allclose(S, S.T):
                raise ValueError("sigma must be symmetric")
            ev = np.linalg.eigvalsh(S)
            if ev.min() < -1e-10 * max(1.0, ev.max()):
                raise ValueError("sigma is not positive semidefinite")
            object.__setattr__(self, "sigma", S)
        if self.binary_columns is None:
            object.__setattr__(self, "binary_columns",
                               frozenset(c for c in range(1, self.p_total + 1) if c % 2 == 0))

    @property
    def active_local(self) -> set:
        return {f"X{c}" for c in self.local_coef}

    @property
    def active_global(self) -> set:
        return {f"X{c}" for c in self.global_coef}

    def with_seed(self, seed: int) -> "SimulationSpec":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return {"name": self.name, "n": self.n, "K": self.K, "family": self.family,
                "correlation": self.correlation, "p_total": self.p_total,
                "local_coef": {f"X{c}": v.tolist() for c, v in self.local_coef.items()},
                "global_coef": {f"X{c}": float(v) for c, v in self.global_coef.items()},
                "alpha_mean": self.alpha_mean, "alpha_sd": self.alpha_sd,
                "beta": self.beta.tolist(),
                "omega": None if self.omega is None else self.omega.tolist(),
                "sigma": None if self.sigma is None else self.sigma.tolist(),
                "binary_columns": sorted(self.binary_columns), "seed": self.seed}


@dataclass(frozen=True)
class SimulationTruth:
    alpha: np.ndarray
    beta: np.ndarray
    local_coef: dict
    global_coef: dict
    omega: Optional[np.ndarray]
    b: np.ndarray
    mu: np.ndarray
    family: str

    def to_dict(self) -> dict:
        return {"family": self.family, "alpha": self.alpha.tolist(), "beta": self.beta.tolist(),
                "local_coef": {k: v.tolist() for k, v in self.local_coef.items()},
                "global_coef": dict(self.global_coef),
                "omega": None if self.omega is None else self.omega.tolist(),
                "b": self.b.tolist()}

    def to_json(self, path=None) -> str:
        s = json.dumps(self.to_dict())
        if path is not None:
            with open(path, "w") as fh:
                fh.write(s)
        return s


def _sym_sqrt(S: np.ndarray) -> np.ndarray:
    ev, V = np.linalg.eigh(S)
    return (V * np.sqrt(np.clip(ev, 0, None))) @ V.T


def simulate(spec: SimulationSpec) -> tuple[ArdDataset, SimulationTruth]:
    rng = rng_for(spec.seed)
    n, K, p = spec.n, spec.K, spec.p_total
    Z = np.empty((n, p))
    for c in range(1, p + 1):
        if c in spec.binary_columns:
            Z[:, c - 1] = rng.integers(0, 2, size=n).astype(float)
        else:
            Z[:, c - 1] = rng.standard_normal(n)

    b = np.zeros((n, K))
    if spec.correlation == DEGREE:
        draw = rng.standard_normal((n, K + 1)) @ _sym_sqrt(spec.sigma)
        alpha = spec.alpha_mean + draw[:, 0]
        b = draw[:, 1:]
    else:
        alpha = rng.normal(spec.alpha_mean, spec.alpha_sd, size=n)
        if spec.correlation == GROUP:
            b = rng.standard_normal((n, K)) @ _sym_sqrt(spec.sigma)

    if spec.family == BINOMIAL:
        size = np.maximum(1, np.rint(np.exp(alpha))).astype(np.int64)
        prob = np.exp(spec.beta)
        if np.any(prob >= 1):
            raise ValueError("binomial simulation needs exp(beta) < 1")
        y = rng.binomial(size[:, None], prob[None, :])
        mu = size[:, None] * prob[None, :]
        b = np.zeros((n, K))
    else:
        eta = alpha[:, None] + spec.beta[None, :] + b
        for c, v in spec.global_coef.items():
            eta = eta + v * Z[:, c - 1][:, None]
        for c, v in spec.local_coef.items():
            eta = eta + np.outer(Z[:, c - 1], v)
        if np.any(eta > np.log(MU_CAP)):
            raise OverflowError(f"simulated means exceed {MU_CAP:g}")
        mu = np.exp(eta)
        if spec.family == families.POISSON:
            y = rng.poisson(mu)
        else:
            om = spec.omega[None, :]
            y = rng.poisson(rng.gamma(np.broadcast_to(om, mu.shape), mu / om))

    data = ArdDataset(
        y=y, covariates=Z, covariate_names=tuple(f"X{c}" for c in range(1, p + 1)),
        group_names=tuple(f"G{k + 1}" for k in range(K)),
        respondent_ids=tuple(f"r{i + 1}" for i in range(n)))
    truth = SimulationTruth(
        alpha=alpha, beta=spec.beta.copy(),
        local_coef={f"X{c}": v.copy() for c, v in spec.local_coef.items()},
        global_coef={f"X{c}": float(v) for c, v in spec.global_coef.items()},
        omega=None if spec.omega is None else spec.omega.copy(), b=b, mu=mu,
        family=spec.family)
    return data, truth


def _alternating(K: int) -> np.ndarray:
    return COEF * np.where(np.arange(K) % 2 == 0, 1.0, -1.0)


def preset(name: str, n: int = 500, K: int = 20, family: Optional[str] = None,
           seed: int = 0, omega: float = 1.0) -> SimulationSpec:
    """Named scenarios: sim1..sim4 and typei (null data, no covariates)."""
    key = name.lower().replace("-", "").replace("_", "")
    if key == "sim1":
        return SimulationSpec(n, K, families.POISSON, NONE, p_total=6,
                              local_coef={3: _alternating(K), 6: _alternating(K)},
                              global_coef={5: COEF}, seed=seed, name="sim1")
    if key == "sim2":
        return SimulationSpec(n, K, families.NEGBIN, GROUP, p_total=0,
                              omega=np.full(K, 3.0), sigma=group_sigma(K), seed=seed,
                              name="sim2")
    if key == "sim3":
        return SimulationSpec(n, K, families.NEGBIN, DEGREE, p_total=6,
                              local_coef={2: _alternating(K)},
                              global_coef={1: COEF, 4: -COEF},
                              omega=np.full(K, 3.0), sigma=degree_sigma(K), seed=seed,
                              name="sim3")
    if key == "sim4":
        return SimulationSpec(n, K, families.POISSON, GROUP, p_total=6,
                              local_coef={1: _alternating(K), 5: _alternating(K)},
                              global_coef={4: COEF, 6: -COEF},
                              sigma=group_sigma(K), seed=seed, name="sim4")
    if key == "typei":
        fam = families.POISSON if family is None else (
            BINOMIAL if family == BINOMIAL else families.check_family(family))
        return SimulationSpec(n, K, fam, NONE, p_total=0,
                              omega=np.full(K, omega) if fam == families.NEGBIN else None,
                              seed=seed, name=f"typei-{fam}")
    raise ValueError(f"unknown preset {name!r}")


def empirical_moments(dataset: ArdDataset, truth: SimulationTruth) -> list[dict]:
    """Per-group empirical mean/variance against the family-implied values.

    The implied variance is E[V(mu)] + Var(mu) over the group's cells.
    """
    out = []
    for k in range(dataset.K):
        y = dataset.y[:, k].astype(float)
        mu = truth.mu[:, k]
        if truth.family == families.NEGBIN:
            cond = mu + mu**2 / truth.omega[k]
        elif truth.family == BINOMIAL:
            cond = mu * (1 - np.exp(truth.beta[k]))
        else:
            cond = mu
        out.append({"group": dataset.group_names[k], "mean": float(y.mean()),
                    "variance": float(y.var(ddof=1)), "model_mean": float(mu.mean()),
                    "model_variance": float(cond.mean() + mu.var())})
    return out
