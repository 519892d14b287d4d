"""Monte Carlo harness: type-I error, power and the wrong-order demonstration."""
from __future__ import annotations

import csv
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import families
from .correlation import HALF, NONE, check_correction, tw_test
from .core import CovariateSpec
from .distribution import dispersion_panel
from .fit import FitConfig, fit
from .residuals import rqr_residuals
from .simulate import preset, simulate
from .workflow import adjusted_spec

FAMILY_INDEX = {families.POISSON: 0, families.NEGBIN: 1}


def cell_seed(base_seed: int, *keys: int) -> int:
    ss = np.random.SeedSequence([int(base_seed) % 2**63, *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class CalibrationGrid:
    n_values: tuple = (100, 500)
    K_values: tuple = (10, 20)
    data_families: tuple = (families.POISSON, families.NEGBIN)
    model_families: tuple = (families.POISSON, families.NEGBIN)
    corrections: tuple = (NONE, HALF)
    replicates: int = 100
    base_seed: int = 0
    alpha: float = 0.05
    data_omega: float = 1.0

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        for name in ("n_values", "K_values", "data_families", "model_families", "corrections"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be nonempty")
        object.__setattr__(self, "data_families",
                           tuple(families.check_family(f) for f in self.data_families))
        object.__setattr__(self, "model_families",
                           tuple(families.check_family(f) for f in self.model_families))
        object.__setattr__(self, "corrections", tuple(check_correction(c) for c in self.corrections))

    def cells(self):
        for n in self.n_values:
            for K in self.K_values:
                for df in self.data_families:
                    yield int(n), int(K), df


@dataclass(frozen=True)
class CalibrationRow:
    data_family: str
    model_family: str
    correction: str
    n: int
    K: int
    rejections: int
    replicates: int          # replicates entering the rate
    nonconverged: int = 0

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.replicates if self.replicates else float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rejection_rate"] = self.rejection_rate
        return d


@dataclass
class CalibrationTable:
    rows: list[CalibrationRow] = field(default_factory=list)
    grid: Optional[CalibrationGrid] = None

    def get(self, data_family, model_family, correction, n, K) -> CalibrationRow:
        for r in self.rows:
            if (r.data_family, r.model_family, r.correction, r.n, r.K) == (
                    data_family, model_family, correction, n, K):
                return r
        raise KeyError((data_family, model_family, correction, n, K))

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["data_family", "model_family", "correction", "n", "K",
                        "rejection_rate", "rejections", "replicates", "nonconverged"])
            for r in self.rows:
                w.writerow([r.data_family, r.model_family, r.correction, r.n, r.K,
                            repr(r.rejection_rate), r.rejections, r.replicates, r.nonconverged])
        return path

    def to_markdown(self) -> str:
        """One row per (data, model, correction); one column per (K, n)."""
        combos = sorted({(r.K, r.n) for r in self.rows})
        head = ["data", "model", "correction"] + [f"K={K}, n={n}" for K, n in combos]
        lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
        keys = list(dict.fromkeys((r.data_family, r.model_family, r.correction) for r in self.rows))
        for key in keys:
            cells = []
            for K, n in combos:
                try:
                    r = self.get(*key, n, K)
                    cell = f"{r.rejection_rate:.2f}"
                    if r.nonconverged:
                        cell += f" ({r.nonconverged} nc)"
                except KeyError:
                    cell = ""
                cells.append(cell)
            lines.append("| " + " | ".join(list(key) + cells) + " |")
        return "\n".join(lines) + "\n"


def _replicate(args) -> dict:
    """Simulate one null draw and test it under every (model family, correction)."""
    grid, n, K, data_family, r = args
    seed = cell_seed(grid.base_seed, n, K, FAMILY_INDEX[data_family], r)
    spec = preset("typei", n=n, K=K, family=data_family, seed=seed, omega=grid.data_omega)
    data, _ = simulate(spec)
    out = {}
    for mf in grid.model_families:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                model = fit(data, FitConfig(family=mf))
                ok = model.converged
            except (ArithmeticError, ValueError, np.linalg.LinAlgError):
                ok = False
        if not ok:
            for c in grid.corrections:
                out[(mf, c)] = None
            continue
        res = rqr_residuals(model, data, cell_seed(seed, 1))
        for c in grid.corrections:
            out[(mf, c)] = bool(tw_test(res, grid.alpha, c).p_value < grid.alpha)
    return {"cell": (n, K, data_family), "outcomes": out}


def run_calibration(grid: CalibrationGrid, workers: int = 1,
                    progress: Optional[Callable[[int, int], None]] = None) -> CalibrationTable:
    tasks = [(grid, n, K, df, r) for n, K, df in grid.cells() for r in range(grid.replicates)]
    tally: dict = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = ex.map(_replicate, tasks, chunksize=4)
            results = list(_report(results, len(tasks), progress))
    else:
        results = list(_report(map(_replicate, tasks), len(tasks), progress))
    for res in results:
        n, K, df = res["cell"]
        for (mf, c), rej in res["outcomes"].items():
            t = tally.setdefault((df, mf, c, n, K), [0, 0, 0])
            if rej is None:
                t[2] += 1
            else:
                t[0] += int(rej)
                t[1] += 1
    rows = [CalibrationRow(df, mf, c, n, K, rej, used, nc)
            for (df, mf, c, n, K), (rej, used, nc) in sorted(
                tally.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2], kv[0][4], kv[0][3]))]
    return CalibrationTable(rows, grid)


def _report(it, total, progress):
    for i, item in enumerate(it, 1):
        if progress is not None:
            progress(i, total)
        yield item


# ------------------------------------------------------------------ power

POWER_PRESETS = ("sim2", "sim4")


@dataclass(frozen=True)
class PowerResult:
    preset: str
    rejections: int
    replicates: int
    nonconverged: int

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.replicates if self.replicates else float("nan")


def _power_replicate(args):
    name, n, K, seed, alpha, correction = args
    data, _ = simulate(preset(name, n=n, K=K, seed=seed))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        spec = adjusted_spec(data)
        try:
            model = fit(data, FitConfig(family=families.NEGBIN, covariates=spec))
        except (ArithmeticError, ValueError, np.linalg.LinAlgError):
            return None
    if not model.converged:
        return None
    res = rqr_residuals(model, data, cell_seed(seed, 1))
    return bool(tw_test(res, alpha, correction).p_value < alpha)


def run_power(preset_name: str, replicates: int, base_seed: int = 0, n: int = 500,
              K: int = 20, alpha: float = 0.05, correction: str = HALF,
              workers: int = 1) -> PowerResult:
    name = preset_name.lower()
    if name not in POWER_PRESETS:
        raise ValueError(f"power preset must be one of {POWER_PRESETS}")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    tasks = [(name, n, K, cell_seed(base_seed, r), alpha, correction) for r in range(replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_power_replicate, tasks))
    else:
        out = [_power_replicate(t) for t in tasks]
    done = [o for o in out if o is not None]
    return PowerResult(name, sum(done), len(done), len(out) - len(done))


# ------------------------------------------------------------ wrong order

def run_wrong_order(seed: int, n: int = 500, K: int = 20, alpha: float = 0.05,
                    correction: str = HALF) -> dict:
    """Correlation and dispersion diagnostics on one Sim1 draw, before and after
    covariate adjustment."""
    data, truth = simulate(preset("sim1", n=n, K=K, seed=seed))
    out = {"seed": int(seed), "truth": {"local": sorted(preset("sim1", n=n, K=K).active_local),
                                        "global": sorted(preset("sim1", n=n, K=K).active_global)}}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        adjusted = adjusted_spec(data)
        for label, spec in (("no_covariates", CovariateSpec()), ("covariate_adjusted", adjusted)):
            nb = fit(data, FitConfig(family=families.NEGBIN, covariates=spec))
            pois = fit(data, FitConfig(family=families.POISSON, covariates=spec))
            tw = tw_test(rqr_residuals(nb, data, cell_seed(seed, 1)), alpha, correction)
            ratios = [r.ratio for r in dispersion_panel(data, pois)]
            out[label] = {"spec": spec.to_dict(), "T": tw.statistic, "p_value": tw.p_value,
                          "reject": tw.p_value < alpha,
                          "dispersion_ratios": ratios,
                          "mean_dispersion_ratio": float(np.mean(ratios))}
    return out
