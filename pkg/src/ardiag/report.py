"""SVG diagnostic panels, each written next to a CSV with the plotted numbers."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .distribution import OVERALL  # noqa: E402
from .tracy_widom import tw1_pdf  # noqa: E402

plt.rcParams["svg.hashsalt"] = "ardiag"
_SVG_META = {"Date": None}
LIGHT, DARK = "#9ecae1", "#08519c"


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def _write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return path


def _grid(m: int):
    cols = max(1, min(5, m))
    rows = max(1, math.ceil(m / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(2.6 * cols, 2.2 * rows), squeeze=False)
    for ax in axes.flat[m:]:
        ax.set_visible(False)
    for ax in axes.flat[:m]:
        ax.locator_params(nbins=3)
        ax.tick_params(labelsize=6)
    fig.subplots_adjust(left=0.08, right=0.98, bottom=0.08, top=0.9, wspace=0.35, hspace=0.6)
    return fig, axes.flat


def _placeholder(path: Path, text: str) -> Path:
    fig, ax = plt.subplots(figsize=(4, 2))
    ax.axis("off")
    ax.text(0.5, 0.5, text, ha="center", va="center")
    return _save(fig, path)


def _line(s):
    xm, ym = float(np.mean(s.x)), float(np.mean(s.y))
    return ym - s.slope * xm, s.slope


def _group_label(dataset, k):
    return dataset.group_names[k] if dataset is not None else f"group {k}"


def _local_panels(report, out: Path, dataset) -> list[Path]:
    paths = []
    by_cov: dict[str, list] = {}
    for s in report.local_screens:
        by_cov.setdefault(s.covariate, []).append(s)
    if not by_cov:
        paths.append(_placeholder(out / "local_screen.svg", "no covariates"))
        paths.append(_write_csv(out / "local_screen.csv",
                                ["covariate", "group", "x", "residual", "intercept", "slope", "t"], []))
        return paths
    rows = []
    for cov, screens in by_cov.items():
        fig, axes = _grid(len(screens))
        for ax, s in zip(axes, screens):
            b0, b1 = _line(s)
            ax.scatter(s.x, s.y, s=3, alpha=0.4, color="0.3", rasterized=True)
            xs = np.array([np.min(s.x), np.max(s.x)])
            ax.plot(xs, b0 + b1 * xs, color=DARK)
            ax.set_title(f"{_group_label(dataset, s.scope)} (t={s.t_value:.1f})", fontsize=7)
            for xi, yi in zip(s.x, s.y):
                rows.append([cov, s.scope, float(xi), float(yi), b0, s.slope, s.t_value])
        fig.suptitle(f"residuals vs {cov}")
        paths.append(_save(fig, out / f"local_{cov}.svg"))
    paths.append(_write_csv(out / "local_screen.csv",
                            ["covariate", "group", "x", "residual", "intercept", "slope", "t"], rows))
    return paths


def _global_panel(report, out: Path) -> list[Path]:
    screens = report.global_screens
    header = ["covariate", "x", "log_degree", "intercept", "slope", "t"]
    if not screens:
        return [_placeholder(out / "global_screen.svg", "no global candidates"),
                _write_csv(out / "global_screen.csv", header, [])]
    fig, axes = _grid(len(screens))
    rows = []
    for ax, s in zip(axes, screens):
        b0, b1 = _line(s)
        ax.scatter(s.x, s.y, s=3, alpha=0.4, color="0.3", rasterized=True)
        xs = np.array([np.min(s.x), np.max(s.x)])
        ax.plot(xs, b0 + b1 * xs, color=DARK)
        ax.set_title(f"{s.covariate} (t={s.t_value:.1f})", fontsize=8)
        rows += [[s.covariate, float(xi), float(yi), b0, s.slope, s.t_value]
                 for xi, yi in zip(s.x, s.y)]
    return [_save(fig, out / "global_screen.svg"), _write_csv(out / "global_screen.csv", header, rows)]


def _tw_panel(report, out: Path) -> list[Path]:
    tw = report.tw_result
    T = tw.statistic
    hi = max(5.0, min(T, 60.0) + 1.0) if np.isfinite(T) else 5.0
    grid = np.linspace(-6.0, hi, 241)
    dens = tw1_pdf(grid)
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.fill_between(grid, dens, color=LIGHT, step="mid")
    ax.axvline(T, color="crimson", lw=1.5)
    ax.set_xlabel("T")
    ax.set_ylabel("density")
    ax.set_title(f"T = {T:.3f}, p = {tw.p_value:.3g}")
    rows = [["density", float(g), float(d)] for g, d in zip(grid, dens)]
    rows.append(["observed_T", T, tw.p_value])
    return [_save(fig, out / "tw_test.svg"),
            _write_csv(out / "tw_test.csv", ["kind", "t", "value"], rows)]


def _draw_rootogram(ax, r):
    colors = np.where(r.multiple_of_5, DARK, LIGHT)
    ax.bar(r.support, r.bar_high - r.bar_low, bottom=r.bar_low, width=0.9, color=colors)
    ax.plot(r.support, r.sqrt_exp, color="crimson", lw=1)
    ax.axhline(0, color="black", lw=0.6)
    ax.tick_params(labelsize=6)


def _rootogram_panels(report, out: Path, dataset) -> list[Path]:
    paths = []
    header = ["scope", "j", "obs", "exp", "bar_low", "bar_high", "is_multiple_of_5"]
    for fam, rs in report.rootograms.items():
        rows = []
        for scope, r in rs.items():
            label = OVERALL if scope == OVERALL else _group_label(dataset, scope)
            rows += [[label, d["j"], d["obs"], d["exp"], d["bar_low"], d["bar_high"],
                      d["is_multiple_of_5"]] for d in r.rows()]
        fig, ax = plt.subplots(figsize=(6, 3))
        _draw_rootogram(ax, rs[OVERALL])
        ax.set_title(f"{fam}: overall")
        ax.set_xlabel("count")
        ax.set_ylabel("sqrt(frequency)")
        paths.append(_save(fig, out / f"rootogram_{fam}_overall.svg"))
        groups = [k for k in rs if k != OVERALL]
        if groups:
            fig, axes = _grid(len(groups))
            for ax, k in zip(axes, groups):
                _draw_rootogram(ax, rs[k])
                ax.set_title(_group_label(dataset, k), fontsize=7)
            paths.append(_save(fig, out / f"rootogram_{fam}_groups.svg"))
        paths.append(_write_csv(out / f"rootogram_{fam}.csv", header, rows))
    return paths


def _dispersion_panel(report, out: Path) -> list[Path]:
    d = report.dispersion
    fig, ax = plt.subplots(figsize=(5, max(2.0, 0.22 * len(d) + 1)))
    ax.scatter([r.ratio for r in d], range(len(d)), color=DARK)
    ax.axvline(1.0, color="0.4", ls="--")
    ax.set_yticks(range(len(d)), [r.name for r in d], fontsize=7)
    ax.set_xlabel("dispersion ratio")
    fig.tight_layout()
    rows = [[r.name, r.ratio, r.D, r.dof, r.p_value] for r in d]
    return [_save(fig, out / "dispersion.svg"),
            _write_csv(out / "dispersion.csv", ["group", "ratio", "D", "dof", "p_chisq"], rows)]


def render_plots(report, out_dir, dataset=None) -> list[Path]:
    """Write every panel and return the list of files written."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create plot directory {out}: {e}") from e
    files: list[Path] = []
    files += _local_panels(report, out, dataset)
    files += _global_panel(report, out)
    files += _tw_panel(report, out)
    files += _rootogram_panels(report, out, dataset)
    files += _dispersion_panel(report, out)
    return files
