"""Maximum-likelihood (or quadratically penalised) fits of the Poisson and
negative binomial ARD models

    y[i, k] ~ F(mu = exp(alpha_i + beta_k + g' z_i + l_k' z_i + gamma_k x_ik), omega_k)

by block-coordinate Newton ascent.  Blocks are the respondent effects, the
per-group coefficients ``(beta_k, l_k, gamma_k)`` and the per-group NB size
``omega_k``; within a block all coordinates are separable and are updated
together from the previous block state.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import families
from .core import ArdDataset, CovariateSpec

log = logging.getLogger(__name__)

ALPHA_FLOOR = -20.0
BETA_FLOOR = -30.0
_MAX_ETA = 30.0


class FitWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FitConfig:
    family: str = families.POISSON
    covariates: CovariateSpec = field(default_factory=CovariateSpec)
    penalty_weight: float = 0.0
    max_iter: int = 500
    tol: float = 1e-8
    omega_bounds: tuple[float, float] = (1e-3, 1e8)
    fixed_omega: Optional[float] = None
    omega_method: str = "adjusted"

    def __post_init__(self):
        object.__setattr__(self, "family", families.check_family(self.family))
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        lo, hi = self.omega_bounds
        if not 0 < lo < hi:
            raise ValueError("omega_bounds must satisfy 0 < low < high")
        if self.penalty_weight < 0:
            raise ValueError("penalty_weight must be >= 0")
        if self.fixed_omega is not None and not self.fixed_omega > 0:
            raise ValueError("fixed_omega must be positive")
        if self.omega_method not in ("adjusted", "mle"):
            raise ValueError("omega_method must be 'adjusted' or 'mle'")

    def to_dict(self) -> dict:
        return {"family": self.family, "covariates": self.covariates.to_dict(),
                "penalty_weight": self.penalty_weight, "max_iter": self.max_iter,
                "tol": self.tol, "omega_bounds": list(self.omega_bounds),
                "fixed_omega": self.fixed_omega, "omega_method": self.omega_method}

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        cov = d.get("covariates", {})
        return cls(family=d["family"],
                   covariates=CovariateSpec(global_=frozenset(cov.get("global", ())),
                                            local=frozenset(cov.get("local", ())),
                                            include_rg=bool(cov.get("include_rg", False))),
                   penalty_weight=d.get("penalty_weight", 0.0),
                   max_iter=d.get("max_iter", 500), tol=d.get("tol", 1e-8),
                   omega_bounds=tuple(d.get("omega_bounds", (1e-3, 1e8))),
                   fixed_omega=d.get("fixed_omega"),
                   omega_method=d.get("omega_method", "adjusted"))


@dataclass(frozen=True)
class FittedModel:
    family: str
    alpha: np.ndarray
    beta: np.ndarray
    global_coef: np.ndarray
    local_coef: np.ndarray
    rg_coef: np.ndarray
    omega: Optional[np.ndarray]
    mu_hat: np.ndarray
    loglik: float
    penalty_weight: float
    converged: bool
    iterations: int
    global_names: tuple[str, ...] = ()
    local_names: tuple[str, ...] = ()
    include_rg: bool = False
    clamped_respondents: tuple[int, ...] = ()
    trace: tuple[float, ...] = ()
    config: Optional[FitConfig] = None

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @property
    def K(self) -> int:
        return self.beta.shape[0]

    @property
    def n_local_params(self) -> int:
        return len(self.local_names) + int(self.include_rg)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "global_coef": dict(zip(self.global_names, self.global_coef.tolist())),
            "local_coef": {c: self.local_coef[:, j].tolist()
                           for j, c in enumerate(self.local_names)},
            "rg_coef": self.rg_coef.tolist() if self.include_rg else None,
            "omega": None if self.omega is None else self.omega.tolist(),
            "loglik": self.loglik,
            "converged": self.converged,
            "iterations": self.iterations,
            "clamped_respondents": list(self.clamped_respondents),
            "config": None if self.config is None else self.config.to_dict(),
        }

    def to_json(self, path=None) -> str:
        s = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(s)
        return s


def model_from_dict(d: dict, dataset: ArdDataset) -> FittedModel:
    """Rebuild a model from its JSON form; mu_hat is recomputed."""
    gnames = tuple(d["global_coef"].keys())
    lnames = tuple(d["local_coef"].keys())
    K = len(d["beta"])
    local = (np.column_stack([d["local_coef"][c] for c in lnames]) if lnames
             else np.zeros((K, 0)))
    include_rg = d.get("rg_coef") is not None
    cfg = FitConfig.from_dict(d["config"]) if d.get("config") else None
    m = FittedModel(
        family=families.check_family(d["family"]),
        alpha=np.asarray(d["alpha"], dtype=float),
        beta=np.asarray(d["beta"], dtype=float),
        global_coef=np.asarray(list(d["global_coef"].values()), dtype=float),
        local_coef=local,
        rg_coef=np.asarray(d["rg_coef"] if include_rg else np.zeros(K), dtype=float),
        omega=None if d.get("omega") is None else np.asarray(d["omega"], dtype=float),
        mu_hat=np.empty((0, 0)), loglik=float(d["loglik"]),
        penalty_weight=cfg.penalty_weight if cfg else 0.0,
        converged=bool(d["converged"]), iterations=int(d["iterations"]),
        global_names=gnames, local_names=lnames, include_rg=include_rg,
        clamped_respondents=tuple(d.get("clamped_respondents", ())), config=cfg)
    return _replace_mu(m, predict_mu(m, dataset))


def load_model(path, dataset: ArdDataset) -> FittedModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh), dataset)


def _replace_mu(m: FittedModel, mu: np.ndarray) -> FittedModel:
    object.__setattr__(m, "mu_hat", mu)
    return m


# ------------------------------------------------------------------ helpers

def _check_dims(model: FittedModel, dataset: ArdDataset) -> None:
    if model.alpha.shape[0] != dataset.n or model.beta.shape[0] != dataset.K:
        raise ValueError(f"model is {model.n}x{model.K} but dataset is {dataset.n}x{dataset.K}")


def _design(dataset: ArdDataset, global_names, local_names):
    idx = {c: j for j, c in enumerate(dataset.covariate_names)}
    Zg = dataset.covariates[:, [idx[c] for c in global_names]]
    Zl = dataset.covariates[:, [idx[c] for c in local_names]]
    return Zg, Zl


def predict_mu(model: FittedModel, dataset: ArdDataset) -> np.ndarray:
    _check_dims(model, dataset)
    Zg, Zl = _design(dataset, model.global_names, model.local_names)
    eta = (model.alpha + Zg @ model.global_coef)[:, None] + model.beta[None, :]
    eta = eta + Zl @ model.local_coef.T
    if model.include_rg:
        eta = eta + model.rg_coef[None, :] * dataset.rg
    return np.exp(eta)


def log_likelihood(model: FittedModel, dataset: ArdDataset) -> float:
    """Exact log-likelihood at the stored fitted means (no penalty)."""
    _check_dims(model, dataset)
    if model.mu_hat.shape != dataset.y.shape:
        raise ValueError("mu_hat does not match dataset dimensions")
    omega = None if model.family == families.POISSON else model.omega[None, :]
    return float(np.sum(families.logpmf(model.family, dataset.y, model.mu_hat, omega)))


# -------------------------------------------------------------------- fitter

class _State:
    """Mutable parameter state for the block sweeps."""

    def __init__(self, alpha, theta, omega):
        self.alpha = alpha          # (n,)
        self.theta = theta          # (K, q): beta_k, local slopes, gamma_k
        self.omega = omega          # (K,) or None


def _eta(alpha, theta, D):
    # D: (n, K, q) group-block design; first column is the intercept
    return alpha[:, None] + np.einsum("ikq,kq->ik", D, theta)


def _cell_ll(family, y, eta, omega):
    eta = np.minimum(eta, _MAX_ETA)
    om = None if omega is None else omega[None, :]
    return families.logpmf(family, y, np.exp(eta), om)


def _penalty(theta, weight):
    if weight == 0 or theta.shape[1] == 1:
        return 0.0
    return 0.5 * weight * float(np.sum(theta[:, 1:] ** 2))


def _line_search(f, x, step, cur, active, max_halvings=25):
    """Per-unit backtracking.  ``f`` maps a parameter array whose leading axis
    indexes independent units to their objective values.  Returns the updated
    parameters and values plus the mask of units that moved."""
    t = np.ones(cur.shape[0])
    new, val = x.copy(), cur.copy()
    pending = active.copy()
    moved = np.zeros_like(active)
    expand = (slice(None),) + (None,) * (x.ndim - 1)
    for _ in range(max_halvings):
        cand = np.where(pending[expand], x + t[expand] * step, x)
        cv = f(cand)
        ok = pending & (cv >= cur - 1e-13 * np.abs(cur))
        new = np.where(ok[expand], cand, new)
        val = np.where(ok, cv, val)
        moved |= ok
        pending &= ~ok
        if not pending.any():
            break
        t = np.where(pending, 0.5 * t, t)
    return new, val, moved


def _alpha_block(family, y, s: _State, D, fixed_mask, inner=25):
    """Newton on each alpha_i (separable, concave)."""
    offset = np.einsum("ikq,kq->ik", D, s.theta)
    om = None if s.omega is None else s.omega[None, :]

    def row_ll(a):
        eta = np.minimum(a[:, None] + offset, _MAX_ETA)
        return np.sum(families.logpmf(family, y, np.exp(eta), om), axis=1)

    alpha = s.alpha.copy()
    cur = row_ll(alpha)
    live = ~fixed_mask
    for _ in range(inner):
        mu = np.exp(np.minimum(alpha[:, None] + offset, _MAX_ETA))
        g, h = families.eta_derivs(family, y, mu, om)
        step = np.clip(g.sum(axis=1) / np.maximum(h.sum(axis=1), 1e-300), -5, 5)
        live &= np.abs(step) > 1e-11
        if not live.any():
            break
        alpha, cur, moved = _line_search(row_ll, alpha, step, cur, live)
        live &= moved
    return alpha


def _group_block(family, y, s: _State, D, weight, inner=25):
    """Newton on each group's (beta_k, slopes_k, gamma_k) (separable, concave)."""
    n, K, q = D.shape
    om = None if s.omega is None else s.omega[None, :]
    P = np.eye(q) * weight
    P[0, 0] = 0.0
    ridge = 1e-10 * np.eye(q)

    def group_ll(th):
        eta = np.minimum(s.alpha[:, None] + np.einsum("ikq,kq->ik", D, th), _MAX_ETA)
        ll = np.sum(families.logpmf(family, y, np.exp(eta), om), axis=0)
        return ll - 0.5 * np.einsum("kq,qr,kr->k", th, P, th)

    theta = s.theta.copy()
    cur = group_ll(theta)
    live = np.ones(K, dtype=bool)
    for _ in range(inner):
        eta = np.minimum(s.alpha[:, None] + np.einsum("ikq,kq->ik", D, theta), _MAX_ETA)
        g, h = families.eta_derivs(family, y, np.exp(eta), om)
        score = np.einsum("ik,ikq->kq", g, D) - theta @ P
        H = np.einsum("ikq,ikr->kqr", D * h[..., None], D) + P + ridge
        try:
            step = np.linalg.solve(H, score[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([np.linalg.lstsq(H[k], score[k], rcond=None)[0] for k in range(K)])
        step = np.clip(step, -5, 5)
        live &= np.max(np.abs(step), axis=1) > 1e-11
        if not live.any():
            break
        theta, cur, moved = _line_search(group_ll, theta, step, cur, live)
        live &= moved
    theta[:, 0] = np.maximum(theta[:, 0], BETA_FLOOR)
    return theta


def _omega_block(y, mu, omega, bounds, pinned, D, adjusted=True, inner=30):
    """Safeguarded Newton on log(omega_k), one group per column.

    With ``adjusted`` the per-group objective is the Cox-Reid adjusted profile
    likelihood: the NB log-likelihood minus half the log-determinant of the
    information of the respondent effects and of the group's own mean
    coefficients.  Without it, fixed-K profiling of n respondent effects
    biases omega upwards.
    """
    lo, hi = np.log(bounds[0]), np.log(bounds[1])
    W0 = mu * omega / (omega + mu)
    S_minus = W0.sum(axis=1, keepdims=True) - W0

    def objective(tau_):
        w = np.exp(tau_)[None, :]
        val = np.sum(families.logpmf(families.NEGBIN, y, mu, w), axis=0)
        if adjusted:
            W = mu * w / (w + mu)
            H = np.einsum("ikq,ikr->kqr", D * W[..., None], D)
            val = val - 0.5 * np.sum(np.log(S_minus + W), axis=0) \
                - 0.5 * np.linalg.slogdet(H)[1]
        return val

    tau = np.log(omega)
    cur = objective(tau)
    live = ~pinned
    for _ in range(inner):
        w = np.exp(tau)
        g, h = families.omega_derivs(y, mu, w[None, :])
        g, h = g.sum(axis=0), h.sum(axis=0)
        if adjusted:
            Wd = mu**2 / (w[None, :] + mu) ** 2
            W = mu * w[None, :] / (w[None, :] + mu)
            H = np.einsum("ikq,ikr->kqr", D * W[..., None], D)
            dH = np.einsum("ikq,ikr->kqr", D * Wd[..., None], D)
            g = g - 0.5 * np.sum(Wd / (S_minus + W), axis=0) \
                - 0.5 * np.einsum("kqr,krq->k", np.linalg.inv(H), dH)
        g_t = w * g
        h_t = w * w * h + w * g
        step = np.where(h_t < 0, -g_t / np.where(h_t < 0, h_t, -1.0), np.sign(g_t))
        step = np.clip(step, -3, 3)
        # clip at the bounds; a unit pressed against a bound is done
        step = np.clip(tau + step, lo, hi) - tau
        live &= np.abs(step) > 1e-8
        if not live.any():
            break
        prev = cur
        tau, cur, moved = _line_search(objective, tau, step, cur, live, max_halvings=12)
        # the profile is flat as omega -> inf; stop once gains are negligible
        live &= moved & (cur - prev > 1e-9)
    out = np.exp(tau)
    out[pinned] = bounds[1]
    return out


def fit(dataset: ArdDataset, config: FitConfig | None = None, **kwargs) -> FittedModel:
    if config is None:
        config = FitConfig(**kwargs)
    elif kwargs:
        raise TypeError("pass either a FitConfig or keyword options, not both")
    spec = config.covariates
    spec.check(dataset)
    family = config.family
    gnames, lnames = spec.ordered(dataset)
    Zg, Zl = _design(dataset, gnames, lnames)
    for j, c in enumerate(gnames + lnames):
        col = dataset.column(c)
        if np.ptp(col) == 0:
            raise ValueError(f"covariate {c!r} is constant and aliased with alpha")

    y = dataset.y.astype(float)
    n, K = y.shape
    pl = len(lnames)
    q = 1 + pl + int(spec.include_rg)
    D = np.empty((n, K, q))
    D[:, :, 0] = 1.0
    if pl:
        D[:, :, 1:1 + pl] = Zl[:, None, :]
    if spec.include_rg:
        D[:, :, -1] = dataset.rg

    colmean = np.maximum(y.mean(axis=0), 0.5 / n)
    beta0 = np.log(colmean)
    rowsum = y.sum(axis=1)
    zero_rows = rowsum == 0
    alpha0 = np.log(np.maximum(rowsum, 0.5) / np.exp(beta0).sum())
    theta = np.zeros((K, q))
    theta[:, 0] = beta0

    omega = None
    pinned = np.zeros(K, dtype=bool)
    if family == families.NEGBIN:
        if config.fixed_omega is not None:
            omega = np.full(K, float(config.fixed_omega))
            pinned[:] = True
        else:
            omega = np.full(K, np.clip(10.0, *config.omega_bounds))
            pinned = y.sum(axis=0) == 0
            if pinned.any():
                warnings.warn(f"groups {np.flatnonzero(pinned).tolist()} have no positive "
                              "counts; omega pinned at its upper bound", FitWarning)
                omega[pinned] = config.omega_bounds[1]

    weight = float(config.penalty_weight)
    s = _State(alpha0, theta, omega)
    # alpha is unbounded below for all-zero rows; pin it at the floor instead
    fixed_alpha = zero_rows
    s.alpha[fixed_alpha] = ALPHA_FLOOR
    if zero_rows.any():
        warnings.warn(f"{int(zero_rows.sum())} all-zero respondent rows; alpha clamped at "
                      f"{ALPHA_FLOOR}", FitWarning)

    def objective():
        ll = float(np.sum(_cell_ll(family, y, _eta(s.alpha, s.theta, D), s.omega)))
        return ll - _penalty(s.theta, weight)

    trace = [objective()]
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        s.alpha = _alpha_block(family, y, s, D, fixed_alpha)
        s.theta = _group_block(family, y, s, D, weight)
        if family == families.NEGBIN and not pinned.all():
            mu = np.exp(np.minimum(_eta(s.alpha, s.theta, D), _MAX_ETA))
            s.omega = _omega_block(y, mu, s.omega, config.omega_bounds, pinned, D,
                                   adjusted=config.omega_method == "adjusted")
        trace.append(objective())
        prev, cur = trace[-2], trace[-1]
        if abs(cur - prev) <= config.tol * max(abs(cur), 1.0):
            converged = True
            break
    if not converged:
        warnings.warn(f"fit did not converge in {config.max_iter} iterations", FitWarning)

    alpha, theta = s.alpha.copy(), s.theta.copy()
    # shared shift of local slopes is aliased with alpha; fold it in
    if pl:
        shift = theta[:, 1:1 + pl].mean(axis=0)
        theta[:, 1:1 + pl] -= shift
        alpha = alpha + Zl @ shift
    # mean(beta) anchor
    c = dataset.beta_anchor() - theta[:, 0].mean()
    theta[:, 0] += c
    alpha = alpha - c
    # global coefficients: least-squares projection of alpha on the global columns
    gcoef = np.zeros(len(gnames))
    if gnames:
        X = np.column_stack([np.ones(n), Zg])
        keep = ~zero_rows
        sol = np.linalg.lstsq(X[keep], alpha[keep], rcond=None)[0]
        gcoef = sol[1:]
        alpha = alpha - Zg @ gcoef

    model = FittedModel(
        family=family, alpha=alpha, beta=theta[:, 0].copy(), global_coef=gcoef,
        local_coef=theta[:, 1:1 + pl].copy(),
        rg_coef=theta[:, -1].copy() if spec.include_rg else np.zeros(K),
        omega=None if s.omega is None else s.omega.copy(),
        mu_hat=np.empty((0, 0)), loglik=0.0, penalty_weight=weight,
        converged=converged, iterations=it, global_names=tuple(gnames),
        local_names=tuple(lnames), include_rg=spec.include_rg,
        clamped_respondents=tuple(int(i) for i in np.flatnonzero(zero_rows)),
        trace=tuple(trace), config=config)
    _replace_mu(model, predict_mu(model, dataset))
    object.__setattr__(model, "loglik", log_likelihood(model, dataset))
    return model
