"""Dataset container, CSV ingestion and light preprocessing for ARD.

An ARD file is an ``n x K`` matrix of counts: ``y[i, k]`` is how many people
respondent ``i`` reports knowing in group ``k``.
"""
from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

ID_COLUMN = "respondent_id"


class ArdInputError(ValueError):
    """Raised for malformed or inconsistent input files."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ArdDataset:
    y: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple[str, ...]
    group_names: tuple[str, ...]
    respondent_ids: tuple[str, ...] = ()
    known_group_sizes: Optional[np.ndarray] = None
    total_population: Optional[float] = None
    rg: Optional[np.ndarray] = None

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 2:
            raise ArdInputError("y must be a 2-d count matrix")
        if not np.all(np.isfinite(y)):
            raise ArdInputError("counts must be finite")
        if np.any(y < 0):
            raise ArdInputError("counts must be nonnegative")
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise ArdInputError("counts must be integers")
        n, K = y.shape
        if n < 2 or K < 1:
            raise ArdInputError(f"need n >= 2 respondents and K >= 1 groups, got {y.shape}")
        object.__setattr__(self, "y", _frozen(y.astype(np.int64)))

        cov = np.asarray(self.covariates, dtype=float)
        if cov.size == 0:
            cov = np.zeros((n, 0))
        if cov.shape != (n, len(self.covariate_names)):
            raise ArdInputError(
                f"covariate matrix shape {cov.shape} does not match "
                f"{n} respondents x {len(self.covariate_names)} names")
        if not np.all(np.isfinite(cov)):
            raise ArdInputError("missing or non-finite covariate values")
        object.__setattr__(self, "covariates", _frozen(cov))
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        _check_unique(self.covariate_names, "covariate names")

        if len(self.group_names) != K:
            raise ArdInputError(f"expected {K} group names, got {len(self.group_names)}")
        object.__setattr__(self, "group_names", tuple(self.group_names))
        _check_unique(self.group_names, "group names")

        ids = tuple(self.respondent_ids) or tuple(str(i) for i in range(n))
        if len(ids) != n:
            raise ArdInputError("respondent_ids length does not match counts")
        _check_unique(ids, "respondent identifiers")
        object.__setattr__(self, "respondent_ids", ids)

        if self.total_population is not None and not self.total_population > 0:
            raise ArdInputError("total_population must be positive")
        if self.known_group_sizes is not None:
            sizes = np.asarray(self.known_group_sizes, dtype=float)
            if sizes.shape != (K,):
                raise ArdInputError("known_group_sizes must have length K")
            if np.any(~(sizes > 0)):
                raise ArdInputError("known group sizes must be positive")
            if self.total_population is not None and np.any(sizes >= self.total_population):
                raise ArdInputError("known group sizes must be below total_population")
            object.__setattr__(self, "known_group_sizes", _frozen(sizes))

        if self.rg is not None:
            rg = np.asarray(self.rg, dtype=float)
            if rg.shape != (n, K):
                raise ArdInputError(f"respondent/group covariate must be {n}x{K}")
            if not np.all(np.isfinite(rg)):
                raise ArdInputError("missing or non-finite respondent/group covariate values")
            object.__setattr__(self, "rg", _frozen(rg))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def K(self) -> int:
        return self.y.shape[1]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.covariate_names.index(name)
        except ValueError:
            raise KeyError(f"unknown covariate {name!r}") from None
        return self.covariates[:, j]

    def beta_anchor(self) -> float:
        """Target value of mean(beta) used to pin the alpha/beta aliasing."""
        if self.known_group_sizes is not None and self.total_population is not None:
            return float(np.mean(np.log(self.known_group_sizes / self.total_population)))
        return 0.0

    def equals(self, other: "ArdDataset") -> bool:
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(a, b)
        return (same(self.y, other.y)
                and same(self.covariates, other.covariates)
                and self.covariate_names == other.covariate_names
                and self.group_names == other.group_names
                and self.respondent_ids == other.respondent_ids
                and same(self.known_group_sizes, other.known_group_sizes)
                and self.total_population == other.total_population
                and same(self.rg, other.rg))


def _check_unique(names: Sequence[str], what: str) -> None:
    seen = set()
    for s in names:
        if s in seen:
            raise ArdInputError(f"duplicate {what}: {s!r}")
        seen.add(s)


@dataclass(frozen=True)
class CovariateSpec:
    global_: frozenset[str] = frozenset()
    local: frozenset[str] = frozenset()
    include_rg: bool = False

    def __post_init__(self):
        object.__setattr__(self, "global_", frozenset(self.global_))
        object.__setattr__(self, "local", frozenset(self.local))
        overlap = self.global_ & self.local
        if overlap:
            raise ValueError(f"covariates cannot be both global and local: {sorted(overlap)}")

    def check(self, dataset: ArdDataset) -> None:
        missing = (self.global_ | self.local) - set(dataset.covariate_names)
        if missing:
            raise KeyError(f"covariates not in dataset: {sorted(missing)}")
        if self.include_rg and dataset.rg is None:
            raise KeyError("respondent/group covariate requested but dataset has none")

    def ordered(self, dataset: ArdDataset) -> tuple[list[str], list[str]]:
        """Global and local names in dataset column order."""
        g = [c for c in dataset.covariate_names if c in self.global_]
        l = [c for c in dataset.covariate_names if c in self.local]
        return g, l

    def to_dict(self) -> dict:
        return {"global": sorted(self.global_), "local": sorted(self.local),
                "include_rg": self.include_rg}


@dataclass(frozen=True)
class ValidationReport:
    row_zero_respondents: list[int]
    heaping_fraction: float
    warnings: list[str] = field(default_factory=list)


# ---------------------------------------------------------------- ingestion

def _read_table(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except (OSError, UnicodeDecodeError, csv.Error) as e:
        raise ArdInputError(f"cannot read {path}: {e}") from e
    if not rows:
        raise ArdInputError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    for r in body:
        if len(r) != len(header):
            raise ArdInputError(f"malformed CSV {path}: row has {len(r)} fields, header has {len(header)}")
    return header, body


def _keyed_matrix(path, ids: Sequence[str], parse) -> tuple[list[str], np.ndarray]:
    header, body = _read_table(path)
    if header[0] != ID_COLUMN:
        raise ArdInputError(f"{path}: first column must be {ID_COLUMN!r}")
    names = header[1:]
    rows = {}
    for r in body:
        key = r[0].strip()
        if key in rows:
            raise ArdInputError(f"{path}: duplicate identifier {key!r}")
        rows[key] = r[1:]
    if set(rows) != set(ids):
        extra = sorted(set(rows) - set(ids))[:3]
        missing = sorted(set(ids) - set(rows))[:3]
        raise ArdInputError(f"identifier mismatch between {path} and ARD file "
                            f"(missing {missing}, extra {extra})")
    out = np.empty((len(ids), len(names)))
    for i, key in enumerate(ids):
        for j, cell in enumerate(rows[key]):
            out[i, j] = parse(cell, path, key, names[j])
    return names, out


def _parse_real(cell: str, path, key, col) -> float:
    cell = cell.strip()
    if cell == "":
        raise ArdInputError(f"{path}: missing value for {key!r}, column {col!r}")
    try:
        v = float(cell)
    except ValueError:
        raise ArdInputError(f"{path}: non-numeric value {cell!r} for {key!r}, column {col!r}") from None
    if not math.isfinite(v):
        raise ArdInputError(f"{path}: non-finite value for {key!r}, column {col!r}")
    return v


def _parse_count(cell: str, path, key, col) -> float:
    v = _parse_real(cell, path, key, col)
    if v < 0 or v != int(v):
        raise ArdInputError(f"{path}: counts must be nonnegative integers, got {cell!r} "
                            f"for {key!r}, group {col!r}")
    return v


def load_dataset(ard_path, covariates_path=None, groups_path=None, rg_path=None,
                 total_population: Optional[float] = None) -> ArdDataset:
    header, body = _read_table(ard_path)
    if header[0] != ID_COLUMN:
        raise ArdInputError(f"{ard_path}: first column must be {ID_COLUMN!r}")
    ids = [r[0].strip() for r in body]
    _check_unique(ids, "respondent identifiers")
    group_names, y = _keyed_matrix(ard_path, ids, _parse_count)

    cov_names: list[str] = []
    cov = np.zeros((len(ids), 0))
    if covariates_path is not None:
        cov_names, cov = _keyed_matrix(covariates_path, ids, _parse_real)

    sizes = None
    if groups_path is not None:
        gh, gb = _read_table(groups_path)
        if gh[:1] != ["name"]:
            raise ArdInputError(f"{groups_path}: header must be name,known_size")
        by_name = {}
        for r in gb:
            by_name[r[0].strip()] = r[1].strip() if len(r) > 1 else ""
        if set(by_name) != set(group_names):
            raise ArdInputError(f"{groups_path}: group names do not match ARD header")
        cells = [by_name[g] for g in group_names]
        if all(c != "" for c in cells):
            sizes = np.array([_parse_real(c, groups_path, g, "known_size")
                              for c, g in zip(cells, group_names)])
        elif any(c != "" for c in cells):
            raise ArdInputError(f"{groups_path}: known_size must be given for all groups or none")

    rg = None
    if rg_path is not None:
        rg_names, rg = _keyed_matrix(rg_path, ids, _parse_real)
        if rg_names != group_names:
            raise ArdInputError(f"{rg_path}: columns must match ARD group columns")

    return ArdDataset(y=y, covariates=cov, covariate_names=tuple(cov_names),
                      group_names=tuple(group_names), respondent_ids=tuple(ids),
                      known_group_sizes=sizes, total_population=total_population, rg=rg)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_keyed(path, ids, names, values) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([ID_COLUMN, *names])
        for rid, row in zip(ids, values):
            w.writerow([rid, *(_fmt(v) for v in row)])


def save_dataset(dataset: ArdDataset, out_dir) -> dict[str, Path]:
    """Write the dataset as ard.csv / covariates.csv / groups.csv / rg.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"ard": out / "ard.csv", "covariates": out / "covariates.csv",
             "groups": out / "groups.csv"}
    _write_keyed(paths["ard"], dataset.respondent_ids, dataset.group_names, dataset.y)
    _write_keyed(paths["covariates"], dataset.respondent_ids, dataset.covariate_names,
                 dataset.covariates)
    with open(paths["groups"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "known_size"])
        for k, g in enumerate(dataset.group_names):
            size = "" if dataset.known_group_sizes is None else _fmt(dataset.known_group_sizes[k])
            w.writerow([g, size])
    if dataset.rg is not None:
        paths["rg"] = out / "rg.csv"
        _write_keyed(paths["rg"], dataset.respondent_ids, dataset.group_names, dataset.rg)
    return paths


# ------------------------------------------------------------ preprocessing

def rescale_unit(dataset: ArdDataset, column: str) -> ArdDataset:
    """Affinely map a covariate column onto [0, 1]."""
    j = dataset.covariate_names.index(column) if column in dataset.covariate_names else None
    if j is None:
        raise KeyError(f"unknown covariate {column!r}")
    x = dataset.covariates[:, j]
    lo, hi = x.min(), x.max()
    if hi == lo:
        raise ValueError(f"cannot rescale {column!r}: zero range")
    cov = dataset.covariates.copy()
    cov[:, j] = (x - lo) / (hi - lo)
    return dataclasses.replace(dataset, covariates=cov)


def validate(dataset: ArdDataset) -> ValidationReport:
    y = dataset.y
    warnings = []
    zero_rows = [int(i) for i in np.flatnonzero(y.sum(axis=1) == 0)]
    if zero_rows:
        warnings.append(f"{len(zero_rows)} respondent(s) report zero for every group")
    zero_cols = [dataset.group_names[k] for k in np.flatnonzero(y.sum(axis=0) == 0)]
    if zero_cols:
        warnings.append(f"groups with no positive responses: {zero_cols}")
    pos = y[y > 0]
    if pos.size == 0:
        warnings.append("no nonzero responses")
        heaping = 0.0
    else:
        heaping = float(np.count_nonzero(pos % 5 == 0) / pos.size)
    return ValidationReport(row_zero_respondents=zero_rows, heaping_fraction=heaping,
                            warnings=warnings)
