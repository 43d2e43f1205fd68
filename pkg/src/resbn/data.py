"""Reservoir table ingestion, variable schema and preprocessing transforms.

A :class:`Dataset` is an immutable, column-typed table: categorical columns
hold string labels, continuous columns hold floats, and missing cells are NaN
in both.  Every transform returns a new dataset with recomputed statistics.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from resbn.errors import DataError, DegenerateRangeError

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"
TRANSFORMS = ("none", "log", "period_age", "log_period_age")

TECTONIC_REGIME = "Tectonic regime"
STRUCTURAL_SETTING = "Structural setting"
LITHOLOGY = "Lithology"
PERIOD = "Period"
GROSS = "Gross"
NETPAY = "Netpay"
POROSITY = "Porosity"
PERMEABILITY = "Permeability"
DEPTH = "Depth"
OIL_DENSITY = "Oil density"
OIL_RF = "Oil recovery factor"
NTG = "Netpay-to-Gross"

LOG_EPS = 1e-6


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: str
    transform: str = "none"

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, CONTINUOUS):
            raise DataError(f"variable {self.name!r}: unknown kind {self.kind!r}")
        if self.transform not in TRANSFORMS:
            raise DataError(f"variable {self.name!r}: unknown transform {self.transform!r}")
        if self.transform == "log" and self.kind != CONTINUOUS:
            raise DataError(f"variable {self.name!r}: log transform needs a continuous variable")
        if self.transform in ("period_age", "log_period_age") and self.kind != CONTINUOUS:
            raise DataError(f"variable {self.name!r}: period ages are continuous")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    def to_json(self) -> dict:
        return {"name": self.name, "kind": self.kind, "transform": self.transform}

    @classmethod
    def from_json(cls, obj: Mapping) -> "VariableSpec":
        return cls(obj["name"], obj["kind"], obj.get("transform", "none"))


def default_schema(include_ntg: bool = True) -> list[VariableSpec]:
    """The reservoir parameter set: four categorical and eight continuous variables."""
    cats = [TECTONIC_REGIME, STRUCTURAL_SETTING, LITHOLOGY, PERIOD]
    conts = [GROSS, NETPAY, POROSITY, PERMEABILITY, DEPTH, OIL_DENSITY, OIL_RF]
    if include_ntg:
        conts.append(NTG)
    return [VariableSpec(c, CATEGORICAL) for c in cats] + [VariableSpec(c, CONTINUOUS) for c in conts]


@dataclass(frozen=True)
class VarStats:
    min: float
    max: float
    mean: float
    count: int

    @property
    def range(self) -> float:
        return self.max - self.min


def _compute_stats(frame: pd.DataFrame, schema: Sequence[VariableSpec]) -> dict[str, VarStats]:
    stats = {}
    for spec in schema:
        if spec.is_categorical:
            continue
        col = frame[spec.name].to_numpy(dtype=float)
        obs = col[~np.isnan(col)]
        if obs.size == 0:
            stats[spec.name] = VarStats(math.nan, math.nan, math.nan, 0)
        else:
            stats[spec.name] = VarStats(float(obs.min()), float(obs.max()), float(obs.mean()), int(obs.size))
    return stats


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-typed reservoir table.

    ``frame`` must be treated as read-only; use the transform functions or
    :meth:`subset` to derive new datasets.
    """

    schema: tuple[VariableSpec, ...]
    frame: pd.DataFrame
    stats: dict[str, VarStats] = field(default=None)

    def __post_init__(self):
        names = [s.name for s in self.schema]
        if len(set(names)) != len(names):
            raise DataError("variable names must be unique within a schema")
        missing = [n for n in names if n not in self.frame.columns]
        if missing:
            raise DataError(f"frame lacks schema columns: {missing}")
        frame = self.frame[names].reset_index(drop=True).copy()
        for spec in self.schema:
            if spec.is_categorical:
                col = frame[spec.name].astype(object)
                frame[spec.name] = col.map(lambda v: np.nan if is_missing(v) else str(v))
            else:
                frame[spec.name] = frame[spec.name].astype(float)
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "frame", frame)
        object.__setattr__(self, "stats", _compute_stats(frame, self.schema))

    # -- accessors -------------------------------------------------------
    @property
    def names(self) -> list[str]:
        return [s.name for s in self.schema]

    @property
    def n_rows(self) -> int:
        return len(self.frame)

    def __len__(self) -> int:
        return len(self.frame)

    def spec(self, name: str) -> VariableSpec:
        for s in self.schema:
            if s.name == name:
                return s
        raise KeyError(name)

    def categorical_names(self) -> list[str]:
        return [s.name for s in self.schema if s.is_categorical]

    def continuous_names(self) -> list[str]:
        return [s.name for s in self.schema if not s.is_categorical]

    def labels(self, name: str) -> list[str]:
        """Sorted observed labels of a categorical column."""
        return sorted(self.frame[name].dropna().unique().tolist())

    def record(self, i: int, drop_missing: bool = True) -> dict:
        row = self.frame.iloc[i]
        out = {}
        for spec in self.schema:
            v = row[spec.name]
            if is_missing(v):
                if not drop_missing:
                    out[spec.name] = None
                continue
            out[spec.name] = v if spec.is_categorical else float(v)
        return out

    def records(self) -> list[dict]:
        return [self.record(i) for i in range(self.n_rows)]

    # -- derivations -----------------------------------------------------
    def subset(self, rows: Iterable[int]) -> "Dataset":
        rows = list(rows)
        return Dataset(self.schema, self.frame.iloc[rows])

    def select(self, names: Sequence[str]) -> "Dataset":
        return Dataset(tuple(self.spec(n) for n in names), self.frame[list(names)])

    def complete_cases(self, names: Sequence[str] | None = None) -> "Dataset":
        cols = list(names) if names is not None else self.names
        mask = self.frame[cols].notna().all(axis=1).to_numpy()
        return self.subset(np.flatnonzero(mask))

    def with_column(self, spec: VariableSpec, values) -> "Dataset":
        frame = self.frame.copy()
        frame[spec.name] = values
        schema = [s for s in self.schema if s.name != spec.name]
        if spec.name in self.names:
            schema = [spec if s.name == spec.name else s for s in self.schema]
        else:
            schema.append(spec)
        return Dataset(tuple(schema), frame)


def is_missing(v) -> bool:
    if v is pd.NA or v is None:
        return True
    return isinstance(v, (float, np.floating)) and math.isnan(v)


def from_records(records: Sequence[Mapping], schema: Sequence[VariableSpec]) -> Dataset:
    cols = {s.name: [r.get(s.name, np.nan) for r in records] for s in schema}
    cols = {k: [np.nan if v is None else v for v in vals] for k, vals in cols.items()}
    return Dataset(tuple(schema), pd.DataFrame(cols, columns=[s.name for s in schema]))


# -- ingestion -----------------------------------------------------------

def load_csv(path, schema: Sequence[VariableSpec], name_map: Mapping[str, str] | None = None) -> Dataset:
    """Read a comma-separated UTF-8 table; empty cells become missing.

    ``name_map`` maps schema names to CSV header names when they differ.
    """
    name_map = dict(name_map or {})
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)
    index = {h: j for j, h in enumerate(header)}
    cols = {}
    for spec in schema:
        col_name = name_map.get(spec.name, spec.name)
        if col_name not in index:
            raise DataError(f"{path}: header lacks column {col_name!r}")
        j = index[col_name]
        values = []
        for i, row in enumerate(rows):
            cell = row[j].strip() if j < len(row) else ""
            if cell == "":
                values.append(np.nan)
            elif spec.is_categorical:
                values.append(cell)
            else:
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: row {i + 1}, column {col_name!r}: cannot parse {cell!r} as a number"
                    ) from None
        cols[spec.name] = values
    frame = pd.DataFrame(cols, columns=[s.name for s in schema])
    return Dataset(tuple(schema), frame)


def bundled_csv_path() -> Path:
    return Path(str(resources.files("resbn") / "resources" / "reservoirs.csv"))


def load_reservoirs(path=None, schema: Sequence[VariableSpec] | None = None,
                    name_map: Mapping[str, str] | None = None, derive_ntg: bool = True) -> Dataset:
    """Load the reservoir table (the bundled public analogue table by default).

    When ``derive_ntg`` is set and the net-to-gross column is absent from the
    file, it is computed as Netpay / Gross.
    """
    path = bundled_csv_path() if path is None else Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    schema = list(schema or default_schema(include_ntg=derive_ntg))
    with path.open(newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    name_map = dict(name_map or {})
    ntg_col = name_map.get(NTG, NTG)
    if derive_ntg and any(s.name == NTG for s in schema) and ntg_col not in header:
        base = [s for s in schema if s.name != NTG]
        ds = load_csv(path, base, name_map)
        ds = derive_ratio(ds, NTG, NETPAY, GROSS)
        return ds.select([s.name for s in schema])
    return load_csv(path, schema, name_map)


def derive_ratio(dataset: Dataset, name: str, numerator: str, denominator: str) -> Dataset:
    num = dataset.frame[numerator].to_numpy(dtype=float)
    den = dataset.frame[denominator].to_numpy(dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / den, np.nan)
    return dataset.with_column(VariableSpec(name, CONTINUOUS), ratio)


# -- transforms ----------------------------------------------------------

def apply_log(dataset: Dataset, var: str, eps: float = LOG_EPS) -> Dataset:
    """Replace each observed value x of ``var`` with ln(x + eps)."""
    spec = dataset.spec(var)
    if spec.is_categorical:
        raise DataError(f"log transform needs a continuous variable, {var!r} is categorical")
    col = dataset.frame[var].to_numpy(dtype=float)
    obs = col[~np.isnan(col)]
    if (obs < 0).any():
        raise DataError(f"log transform of {var!r}: negative value {obs[obs < 0][0]}")
    if (obs + eps <= 0).any():
        raise DataError(f"log transform of {var!r}: zero value with eps={eps}")
    with np.errstate(invalid="ignore"):
        out = np.log(col + eps)
    new_transform = "log_period_age" if spec.transform == "period_age" else "log"
    return dataset.with_column(replace(spec, transform=new_transform), out)


_PERIOD_SPLIT = re.compile(r"[-/]")


@dataclass(frozen=True)
class PeriodAgeTable:
    """Period label -> (start Ma, end Ma, midpoint Ma).

    Compound labels ("TRIASSIC-JURASSIC", "CAMBRIAN-ORDOVICIAN/CARBONIFEROUS")
    span from the oldest component start to the youngest component end.
    """

    bounds: Mapping[str, tuple[float, float]]

    def __post_init__(self):
        for label, (start, end) in self.bounds.items():
            if not start > end:
                raise DataError(f"period {label!r}: start {start} must exceed end {end}")

    @classmethod
    def from_csv(cls, path) -> "PeriodAgeTable":
        with Path(path).open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        return cls({r["period"].strip().upper(): (float(r["start_ma"]), float(r["end_ma"])) for r in rows})

    @classmethod
    def default(cls) -> "PeriodAgeTable":
        return cls.from_csv(str(resources.files("resbn") / "resources" / "period_ages.csv"))

    def lookup(self, label: str) -> tuple[float, float, float]:
        key = label.strip().upper()
        if key in self.bounds:
            start, end = self.bounds[key]
        else:
            parts = [p.strip() for p in _PERIOD_SPLIT.split(key) if p.strip()]
            if not parts or any(p not in self.bounds for p in parts):
                raise DataError(f"period label {label!r} not in the age table")
            start = max(self.bounds[p][0] for p in parts)
            end = min(self.bounds[p][1] for p in parts)
        return start, end, (start + end) / 2.0

    def midpoint(self, label: str) -> float:
        return self.lookup(label)[2]


def period_to_age(dataset: Dataset, table: PeriodAgeTable | None = None, log: bool = False,
                  var: str = PERIOD) -> Dataset:
    """Turn the categorical period column into midpoint ages (optionally ln of them)."""
    table = table or PeriodAgeTable.default()
    spec = dataset.spec(var)
    if not spec.is_categorical:
        raise DataError(f"{var!r} is not categorical")
    ages = {}
    for label in dataset.frame[var].dropna().unique():
        ages[label] = table.midpoint(label)
    col = dataset.frame[var].map(lambda v: ages[v] if not is_missing(v) else np.nan).to_numpy(dtype=float)
    if log:
        col = np.log(col)
    new = VariableSpec(var, CONTINUOUS, "log_period_age" if log else "period_age")
    return dataset.with_column(new, col)


def minmax_unit(value: float, stats: VarStats) -> float:
    if not stats.max > stats.min:
        raise DegenerateRangeError(f"degenerate range [{stats.min}, {stats.max}]")
    return (value - stats.min) / (stats.max - stats.min)


def transform_record(record: Mapping, schema: Sequence[VariableSpec], table: PeriodAgeTable | None = None,
                     eps: float = LOG_EPS) -> dict:
    """Apply the schema's transforms to a raw record (labels, raw magnitudes).

    Values already on the transformed scale are not detected; pass raw values.
    """
    out = dict(record)
    for spec in schema:
        v = out.get(spec.name)
        if v is None or is_missing(v) or spec.transform == "none":
            continue
        if spec.transform in ("period_age", "log_period_age") and isinstance(v, str):
            age = (table or PeriodAgeTable.default()).midpoint(v)
            out[spec.name] = math.log(age) if spec.transform == "log_period_age" else age
        elif spec.transform == "log":
            x = float(v)
            if x < 0 or x + eps <= 0:
                raise DataError(f"log transform of {spec.name!r}: invalid value {x}")
            out[spec.name] = math.log(x + eps)
    return out
