"""End-to-end diagnostic workflow.

Stages: (1) no-covariate Poisson null, (2) covariate screens, (3) covariate-
adjusted Poisson and NB nulls, (4) correlation test on the NB null's
randomized quantile residuals, (5) dispersion panel and rootograms,
(6) an advisory model recommendation.
"""
from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import families
from .core import ArdDataset, CovariateSpec, validate
from .correlation import HALF, TwTestResult, tw_test
from .covariates import (CovariateSuggestion, SlopeScreen, global_screen, local_screen,
                         screen_table, suggest_spec)
from .distribution import (HANGING, OVERALL, DispersionResult, Rootogram, dispersion_panel,
                           rootogram_set)
from .fit import FitConfig, FittedModel, fit
from .residuals import pearson_residuals, rqr_residuals, save_residuals

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
POISSON_REC, NEGBIN_REC, CORRELATED_REC = "Poisson", "NegBinomial", "CorrelatedModel"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class WorkflowOptions:
    seed: int = 0
    alpha: float = 0.05
    correction: str = HALF
    t_threshold: float = 4.0
    local_fraction: float = 0.1
    penalty: float = 0.0
    include_rg: bool = False
    style: str = HANGING
    covariates: Optional[CovariateSpec] = None   # skip screening when given


@dataclass
class DiagnosticReport:
    dataset_summary: dict
    local_screens: list[SlopeScreen]
    global_screens: list[SlopeScreen]
    covariate_suggestion: CovariateSuggestion
    tw_result: TwTestResult
    dispersion: list[DispersionResult]
    rootograms: dict                     # family -> {scope: Rootogram}
    recommendation: str
    rationale: str
    fits: dict = field(default_factory=dict)
    options: Optional[WorkflowOptions] = None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "dataset_summary": self.dataset_summary,
            "covariate_suggestion": self.covariate_suggestion.to_dict(),
            "local_screen": screen_table(self.local_screens),
            "global_screen": screen_table(self.global_screens),
            "tw_result": self.tw_result.to_dict(),
            "dispersion_panel": [r.to_dict() for r in self.dispersion],
            "rootograms": {fam: {str(scope): _rootogram_dict(r) for scope, r in rs.items()}
                           for fam, rs in self.rootograms.items()},
            "recommendation": self.recommendation,
            "recommendation_is_advisory": True,
            "rationale": self.rationale,
            "fits": {name: _fit_summary(m) for name, m in self.fits.items()},
        }

    def to_json(self, path=None) -> str:
        s = json.dumps(_clean(self.to_dict()), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(s)
        return s


def _clean(obj):
    """Replace non-finite floats so the JSON is standard."""
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else str(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _rootogram_dict(r: Rootogram) -> dict:
    return {"style": r.style, "rows": r.rows(), "tail_mass": r.tail_mass,
            "obs_tail": r.obs_tail, "n_cells": r.n_cells}


def _fit_summary(m: FittedModel) -> dict:
    return {"family": m.family, "loglik": m.loglik, "converged": m.converged,
            "iterations": m.iterations, "local": list(m.local_names),
            "global": dict(zip(m.global_names, m.global_coef.tolist())),
            "omega": None if m.omega is None else m.omega.tolist()}


def recommend(tw_result: TwTestResult, dispersion: list[DispersionResult],
              alpha: float = 0.05) -> tuple[str, str]:
    """CorrelatedModel if the correlation test rejects; otherwise NegBinomial if
    any Bonferroni-adjusted dispersion test rejects; otherwise Poisson."""
    if tw_result.p_value < alpha:
        return CORRELATED_REC, (
            f"largest-eigenvalue test rejects independence (T = {tw_result.statistic:.2f}, "
            f"p = {tw_result.p_value:.3g}); residual group correlation remains after "
            "covariate adjustment")
    K = max(len(dispersion), 1)
    flagged = [r.name for r in dispersion if r.p_value < alpha / K]
    if flagged:
        return NEGBIN_REC, (f"no evidence of group correlation; {len(flagged)} group(s) "
                            f"overdispersed relative to Poisson after Bonferroni over {K} "
                            f"groups: {flagged}")
    return POISSON_REC, ("no evidence of group correlation or of overdispersion relative "
                         "to the covariate-adjusted Poisson model")


def screen_covariates(dataset: ArdDataset, null_model: FittedModel,
                      t_threshold: float = 4.0, local_fraction: float = 0.1):
    """Local screens on the null's Pearson residuals, then global screens on the
    remaining covariates."""
    ls = local_screen(pearson_residuals(null_model, dataset), dataset)
    local = suggest_spec(ls, [], t_threshold, local_fraction).local
    gs = global_screen(null_model, dataset, exclude=local)
    return ls, gs, suggest_spec(ls, gs, t_threshold, local_fraction)


def adjusted_spec(dataset: ArdDataset, t_threshold: float = 4.0,
                  local_fraction: float = 0.1) -> CovariateSpec:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        null = fit(dataset, FitConfig(family=families.POISSON))
    return screen_covariates(dataset, null, t_threshold, local_fraction)[2].as_spec()


def _write_rows(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def run_workflow(dataset: ArdDataset, options: WorkflowOptions | None = None,
                 out_dir=None, render: bool = True) -> DiagnosticReport:
    opts = options or WorkflowOptions()
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

    def stage(name, fn):
        try:
            return fn()
        except Exception as e:              # noqa: BLE001 - re-raised with the stage name
            raise StageError(name, e) from e

    vrep = validate(dataset)
    summary = {"n": dataset.n, "K": dataset.K, "p": dataset.p,
               "groups": list(dataset.group_names),
               "covariates": list(dataset.covariate_names),
               "zero_rows": len(vrep.row_zero_respondents),
               "heaping_fraction": vrep.heaping_fraction, "warnings": vrep.warnings}

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        null = stage("null_fit", lambda: fit(dataset, FitConfig(
            family=families.POISSON, penalty_weight=opts.penalty)))

        def _screens():
            return screen_covariates(dataset, null, opts.t_threshold, opts.local_fraction)
        ls, gs, suggestion = stage("covariate_screen", _screens)
        if out is not None:
            _write_rows(out / "local_screen.csv", screen_table(ls))
            _write_rows(out / "global_screen.csv", screen_table(gs))

        spec = opts.covariates or suggestion.as_spec(
            include_rg=opts.include_rg and dataset.rg is not None)
        pois = stage("poisson_fit", lambda: fit(dataset, FitConfig(
            family=families.POISSON, covariates=spec, penalty_weight=opts.penalty)))
        nb = stage("negbin_fit", lambda: fit(dataset, FitConfig(
            family=families.NEGBIN, covariates=spec, penalty_weight=opts.penalty)))
        if out is not None:
            null.to_json(out / "fit_null_poisson.json")
            pois.to_json(out / "fit_poisson.json")
            nb.to_json(out / "fit_negbin.json")

        def _tw():
            res = rqr_residuals(nb, dataset, opts.seed)
            if out is not None:
                save_residuals(res, dataset, out / "residuals_rqr_negbin.csv", nb)
            return tw_test(res, opts.alpha, opts.correction)
        tw = stage("correlation_test", _tw)
        if out is not None:
            tw.to_json(out / "tw_test.json")

        disp = stage("dispersion", lambda: dispersion_panel(dataset, pois))
        if out is not None:
            _write_rows(out / "dispersion.csv", [r.to_dict() for r in disp])
        roots = stage("rootogram", lambda: {
            families.POISSON: rootogram_set(dataset, pois, opts.style),
            families.NEGBIN: rootogram_set(dataset, nb, opts.style)})
        if out is not None:
            for fam, rs in roots.items():
                for scope, r in rs.items():
                    name = OVERALL if scope == OVERALL else dataset.group_names[scope]
                    _write_rows(out / f"rootogram_{fam}_{name}.csv", r.rows())

    rec, why = recommend(tw, disp, opts.alpha)
    summary["fit_warnings"] = sorted({str(w.message) for w in caught})
    report = DiagnosticReport(
        dataset_summary=summary, local_screens=ls, global_screens=gs,
        covariate_suggestion=suggestion, tw_result=tw, dispersion=disp, rootograms=roots,
        recommendation=rec, rationale=why,
        fits={"null_poisson": null, "poisson": pois, "negbin": nb}, options=opts)
    if out is not None:
        report.to_json(out / "report.json")
        if render:
            from .report import render_plots
            stage("render", lambda: render_plots(report, out / "plots", dataset))
    return report
