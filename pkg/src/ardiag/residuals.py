"""Pearson and randomized quantile residuals."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from . import families
from .core import ID_COLUMN, ArdDataset
from .fit import FittedModel, _check_dims

PEARSON = "pearson"
RQR = "rqr"
EPS = 1e-12


@dataclass(frozen=True)
class ResidualMatrix:
    values: np.ndarray
    kind: str
    model_family: str
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in (PEARSON, RQR):
            raise ValueError(f"unknown residual kind {self.kind!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("residuals must be finite")

    @property
    def shape(self):
        return self.values.shape


def _omega(model: FittedModel):
    return None if model.family == families.POISSON else model.omega[None, :]


def pearson_residuals(model: FittedModel, dataset: ArdDataset) -> ResidualMatrix:
    _check_dims(model, dataset)
    mu = model.mu_hat
    if np.any(~(mu > 0)):
        raise ValueError("fitted means must be positive")
    v = families.variance(model.family, mu, _omega(model))
    r = (dataset.y - mu) / np.sqrt(v)
    return ResidualMatrix(values=r, kind=PEARSON, model_family=model.family)


def quantile_residuals(family: str, y, mu, omega, u) -> np.ndarray:
    """Map uniforms ``u`` in (0, 1) to normal scores within each count's CDF step.

    Cells whose step lies in the upper half are computed from survival
    functions so extreme upper-tail cells keep full precision.
    """
    y = np.asarray(y, dtype=float)
    lo = families.cdf(family, y - 1, mu, omega)
    hi = families.cdf(family, y, mu, omega)
    p = lo + u * (hi - lo)
    upper = lo > 0.5
    out = np.empty(np.broadcast(y, mu).shape)
    out[~upper] = stats.norm.ppf(np.clip(p[~upper], EPS, 1 - EPS))
    if upper.any():
        s_lo = families.sf(family, y - 1, mu, omega)   # P(Y >= y)
        s_hi = families.sf(family, y, mu, omega)       # P(Y > y)
        q = s_hi + (1 - u) * (s_lo - s_hi)
        out[upper] = stats.norm.isf(np.clip(q[upper], EPS, 1 - EPS))
    return out


def uniforms(seed: int, shape) -> np.ndarray:
    """Counter-based (Philox) uniform draws keyed by seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) % 2**64)).random(shape)


def rqr_residuals(model: FittedModel, dataset: ArdDataset, seed: int) -> ResidualMatrix:
    _check_dims(model, dataset)
    omega = None if model.family == families.POISSON else np.broadcast_to(
        model.omega[None, :], dataset.y.shape)
    u = uniforms(seed, dataset.y.shape)
    r = quantile_residuals(model.family, dataset.y, model.mu_hat, omega, u)
    return ResidualMatrix(values=r, kind=RQR, model_family=model.family, seed=int(seed))


def model_fingerprint(model: FittedModel) -> str:
    h = hashlib.sha256(model.to_json().encode())
    return h.hexdigest()[:16]


def save_residuals(res: ResidualMatrix, dataset: ArdDataset, path, model=None) -> Path:
    """Write residuals as an ARD-shaped CSV with a JSON sidecar."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([ID_COLUMN, *dataset.group_names])
        for rid, row in zip(dataset.respondent_ids, res.values):
            w.writerow([rid, *(repr(float(v)) for v in row)])
    meta = {"kind": res.kind, "seed": res.seed, "model_family": res.model_family,
            "model_fingerprint": None if model is None else model_fingerprint(model)}
    side = path.with_suffix(".json")
    side.write_text(json.dumps(meta, indent=2))
    return path


def load_residuals(path) -> ResidualMatrix:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    vals = np.array([[float(c) for c in r[1:]] for r in rows[1:]])
    return ResidualMatrix(values=vals, kind=meta["kind"], model_family=meta["model_family"],
                          seed=meta.get("seed"))
