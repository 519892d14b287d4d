"""Command-line entry point: ``ardiag <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from . import families
from .core import ArdInputError, CovariateSpec, load_dataset, save_dataset
from .correlation import HALF, NONE, tw_test
from .distribution import HANGING, OVERALL, STYLES, dispersion_panel, rootogram
from .fit import FitConfig, fit, load_model
from .residuals import PEARSON, RQR, pearson_residuals, rqr_residuals, save_residuals

EXIT_OK, EXIT_STAGE, EXIT_INPUT = 0, 2, 3
log = logging.getLogger("ardiag")


def _names(s: str | None) -> frozenset:
    return frozenset(x.strip() for x in s.split(",") if x.strip()) if s else frozenset()


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ard", required=True, help="respondent x group count CSV")
    p.add_argument("--covariates", help="respondent covariate CSV")
    p.add_argument("--groups", help="group metadata CSV (known sizes)")
    p.add_argument("--rg", help="respondent x group covariate CSV")
    p.add_argument("--population", type=float, help="total population size")


def _model_args(p: argparse.ArgumentParser, family_default=families.POISSON) -> None:
    p.add_argument("--family", default=family_default, choices=[families.POISSON, families.NEGBIN])
    p.add_argument("--local", help="comma-separated local covariates")
    p.add_argument("--global", dest="global_", help="comma-separated global covariates")
    p.add_argument("--include-rg", action="store_true")
    p.add_argument("--penalty", type=float, default=0.0)
    p.add_argument("--model", help="previously fitted model JSON (skips fitting)")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="ardiag_out")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--correction", default=HALF, choices=[NONE, HALF])
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ardiag", description="Diagnostics for ARD count models.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diagnose", help="run the full diagnostic workflow")
    _data_args(p)
    _common(p)
    p.add_argument("--family", default=None, help="ignored; both families are fitted")
    p.add_argument("--penalty", type=float, default=0.0)
    p.add_argument("--threshold", type=float, default=4.0, help="screen |t| threshold")
    p.add_argument("--local", help="override the screened local covariates")
    p.add_argument("--global", dest="global_", help="override the screened global covariates")
    p.add_argument("--include-rg", action="store_true")
    p.add_argument("--no-plots", action="store_true")

    for name, helptext, fam in (("fit", "fit a null model", families.POISSON),
                                ("residuals", "Pearson or randomized quantile residuals", families.NEGBIN),
                                ("tw-test", "largest-eigenvalue correlation test", families.NEGBIN),
                                ("rootogram", "observed vs expected count frequencies", families.POISSON),
                                ("dispersion", "per-group dispersion index (Poisson fit)", families.POISSON)):
        p = sub.add_parser(name, help=helptext)
        _data_args(p)
        _model_args(p, fam)
        _common(p)
        if name == "residuals":
            p.add_argument("--kind", default=RQR, choices=[RQR, PEARSON])
        if name == "rootogram":
            p.add_argument("--style", default=HANGING, choices=list(STYLES))
            p.add_argument("--scope", default=OVERALL, help="'overall' or a group name")
            p.add_argument("--j-max", type=int)

    p = sub.add_parser("simulate", help="draw a dataset from a named scenario")
    p.add_argument("--preset", default="sim1",
                   choices=["sim1", "sim2", "sim3", "sim4", "typei"])
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--K", type=int, default=20)
    p.add_argument("--family", default=None, help="typei data family")
    p.add_argument("--omega", type=float, default=1.0, help="typei NB dispersion")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="sim_out")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("calibrate", help="type-I error calibration study")
    p.add_argument("--n-values", default="100,500")
    p.add_argument("--K-values", default="10,20")
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="calibration_out")
    p.add_argument("-v", "--verbose", action="store_true")
    return ap


def _load(args):
    return load_dataset(args.ard, args.covariates, args.groups, args.rg, args.population)


def _spec(args) -> CovariateSpec:
    return CovariateSpec(global_=_names(args.global_), local=_names(args.local),
                         include_rg=getattr(args, "include_rg", False))


def _model(args, data, family=None):
    if getattr(args, "model", None):
        return load_model(args.model, data)
    cfg = FitConfig(family=family or args.family, covariates=_spec(args),
                    penalty_weight=args.penalty)
    model = fit(data, cfg)
    if not model.converged:
        log.warning("fit did not converge after %d iterations", model.iterations)
    return model


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_rows(path: Path, rows: list[dict]) -> None:
    from .workflow import _write_rows as w
    w(path, rows)


def cmd_diagnose(args) -> int:
    from .workflow import WorkflowOptions, run_workflow
    data = _load(args)
    cov = None
    if args.local or args.global_:
        cov = _spec(args)
    opts = WorkflowOptions(seed=args.seed, alpha=args.alpha, correction=args.correction,
                           t_threshold=args.threshold, penalty=args.penalty,
                           include_rg=args.include_rg, covariates=cov)
    rep = run_workflow(data, opts, out_dir=args.out, render=not args.no_plots)
    print(f"recommendation: {rep.recommendation} (advisory)")
    print(f"  {rep.rationale}")
    print(f"report: {Path(args.out) / 'report.json'}")
    return EXIT_OK


def cmd_fit(args) -> int:
    data = _load(args)
    model = _model(args, data)
    path = _out(args) / f"fit_{model.family}.json"
    model.to_json(path)
    print(f"{model.family} fit: loglik={model.loglik:.4f} converged={model.converged} -> {path}")
    return EXIT_OK


def cmd_residuals(args) -> int:
    data = _load(args)
    model = _model(args, data)
    res = rqr_residuals(model, data, args.seed) if args.kind == RQR else pearson_residuals(model, data)
    path = save_residuals(res, data, _out(args) / f"residuals_{args.kind}_{model.family}.csv", model)
    print(f"residuals -> {path}")
    return EXIT_OK


def cmd_tw(args) -> int:
    data = _load(args)
    model = _model(args, data)
    r = tw_test(rqr_residuals(model, data, args.seed), args.alpha, args.correction)
    path = _out(args) / "tw_test.json"
    r.to_json(path)
    print(f"T = {r.statistic:.4f}, p = {r.p_value:.4g}, reject = {r.reject} -> {path}")
    return EXIT_OK


def cmd_rootogram(args) -> int:
    data = _load(args)
    model = _model(args, data)
    scope = args.scope
    if scope != OVERALL:
        if scope not in data.group_names:
            raise ArdInputError(f"unknown group {scope!r}")
        scope = data.group_names.index(scope)
    r = rootogram(data, model, args.style, scope, args.j_max)
    path = _out(args) / f"rootogram_{args.scope}.csv"
    _write_rows(path, r.rows())
    print(f"rootogram ({len(r.support)} bins, tail mass {r.tail_mass:.3g}) -> {path}")
    return EXIT_OK


def cmd_dispersion(args) -> int:
    data = _load(args)
    model = _model(args, data, family=families.POISSON)
    rows = [r.to_dict() for r in dispersion_panel(data, model)]
    path = _out(args) / "dispersion.csv"
    _write_rows(path, rows)
    for r in rows:
        print(f"{r['group']:>16s}  ratio={r['ratio']:.3f}  p={r['p_chisq']:.3g}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .simulate import preset, simulate
    spec = preset(args.preset, n=args.n, K=args.K, family=args.family, seed=args.seed,
                  omega=args.omega)
    data, truth = simulate(spec)
    out = _out(args)
    paths = save_dataset(data, out)
    truth.to_json(out / "truth.json")
    (out / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2))
    print(f"simulated {args.preset}: n={data.n}, K={data.K} -> {', '.join(map(str, paths.values()))}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    from .calibration import CalibrationGrid, run_calibration
    grid = CalibrationGrid(n_values=tuple(int(v) for v in args.n_values.split(",")),
                           K_values=tuple(int(v) for v in args.K_values.split(",")),
                           replicates=args.replicates, base_seed=args.seed, alpha=args.alpha)

    def progress(i, total):
        if i % max(1, total // 20) == 0 or i == total:
            log.info("replicate %d/%d", i, total)

    table = run_calibration(grid, workers=args.workers, progress=progress)
    out = _out(args)
    table.to_csv(out / "calibration_table.csv")
    md = table.to_markdown()
    (out / "calibration_table.md").write_text(md)
    print(md)
    return EXIT_OK


COMMANDS = {"diagnose": cmd_diagnose, "fit": cmd_fit, "residuals": cmd_residuals,
            "tw-test": cmd_tw, "rootogram": cmd_rootogram, "dispersion": cmd_dispersion,
            "simulate": cmd_simulate, "calibrate": cmd_calibrate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    warnings.simplefilter("default")
    try:
        return COMMANDS[args.command](args)
    except (ArdInputError, FileNotFoundError, KeyError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:          # noqa: BLE001 - reported as a stage failure
        from .workflow import StageError
        if isinstance(e, StageError) and isinstance(e.cause, ArdInputError):
            print(f"input error: {e}", file=sys.stderr)
            return EXIT_INPUT
        print(f"error: {e}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
