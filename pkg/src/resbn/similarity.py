"""Mixed-data distances between reservoir records and analogue retrieval.

Three metrics are supported:

gower
    Weighted mean of per-variable dissimilarities: label mismatch for
    categorical variables, ``|u - t| / range`` for continuous ones.  A
    variable missing on either side gets weight zero for that pair.
hamming
    Weighted *sum* of the same dissimilarities, so on categorical-only rows it
    is the number of mismatching labels.
cosine
    ``1 - cos`` between encoded vectors.  Categorical entries encode as 1 on
    the target and the match indicator on the compared row; continuous
    entries are min-max scaled to the unit interval.

``gower_variant="ratio_scaled"`` swaps the continuous term for
``|u - t| / (1 - min/max)`` without prior scaling by the maximum; it is
not bounded by 1 and exists for comparison runs only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from resbn import kernels
from resbn.data import Dataset, VarStats, is_missing
from resbn.errors import ConfigError, IncomparableError

METRICS = ("gower", "hamming", "cosine")
GOWER_VARIANTS = ("classical", "ratio_scaled")


@dataclass(frozen=True)
class MetricConfig:
    kind: str
    variables: tuple[str, ...]
    categorical: frozenset
    stats: Mapping[str, VarStats]
    weights: Mapping[str, float] = field(default_factory=dict)
    gower_variant: str = "classical"

    def __post_init__(self):
        if self.kind not in METRICS:
            raise ConfigError(f"unknown metric {self.kind!r}; expected one of {METRICS}")
        if self.gower_variant not in GOWER_VARIANTS:
            raise ConfigError(f"unknown gower variant {self.gower_variant!r}")
        if any(w < 0 for w in self.weights.values()):
            raise ConfigError("weights must be nonnegative")
        if not any(self.weight(v) > 0 for v in self.variables):
            raise ConfigError("at least one variable needs a positive weight")

    @classmethod
    def from_dataset(cls, data: Dataset, kind: str = "gower", weights: Mapping[str, float] | None = None,
                     gower_variant: str = "classical", exclude: Sequence[str] = ()) -> "MetricConfig":
        names = tuple(n for n in data.names if n not in set(exclude))
        return cls(kind, names, frozenset(data.categorical_names()),
                   {k: v for k, v in data.stats.items() if k in names}, dict(weights or {}),
                   gower_variant)

    def weight(self, var: str) -> float:
        return float(self.weights.get(var, 1.0))

    def without(self, exclude: Sequence[str]) -> "MetricConfig":
        keep = tuple(v for v in self.variables if v not in set(exclude))
        return MetricConfig(self.kind, keep, self.categorical, self.stats, self.weights,
                            self.gower_variant)

    def with_kind(self, kind: str) -> "MetricConfig":
        return MetricConfig(kind, self.variables, self.categorical, self.stats, self.weights,
                            self.gower_variant)

    def scale(self, var: str) -> float:
        """Denominator of the continuous dissimilarity term (<= 0 means 'no spread')."""
        s = self.stats[var]
        if s.count == 0:
            return 0.0
        if self.kind == "gower" and self.gower_variant == "ratio_scaled":
            return 1.0 - s.min / s.max if s.max != 0 else 0.0
        return s.max - s.min


def _present(record: Mapping, var: str) -> bool:
    v = record.get(var)
    return v is not None and not is_missing(v)


def _terms(u: Mapping, t: Mapping, cfg: MetricConfig):
    """Yield (weight, dissimilarity) for each variable comparable on both records."""
    for var in cfg.variables:
        w = cfg.weight(var)
        if not (_present(u, var) and _present(t, var)):
            continue
        if var in cfg.categorical:
            yield w, 0.0 if u[var] == t[var] else 1.0
        else:
            scale = cfg.scale(var)
            yield w, abs(float(u[var]) - float(t[var])) / scale if scale > 0 else 0.0


def gower_distance(u: Mapping, t: Mapping, cfg: MetricConfig) -> float:
    num = den = 0.0
    for w, d in _terms(u, t, cfg.with_kind("gower") if cfg.kind != "gower" else cfg):
        num += w * d
        den += w
    if den == 0:
        raise IncomparableError("records share no comparable variable with positive weight")
    return num / den


def hamming_distance(u: Mapping, t: Mapping, cfg: MetricConfig) -> float:
    cfg = cfg.with_kind("hamming") if cfg.kind != "hamming" else cfg
    return float(sum(w * d for w, d in _terms(u, t, cfg)))


def _unit(value: float, stats: VarStats) -> float:
    rng = stats.max - stats.min
    if not rng > 0:
        return 0.0
    # values outside the reference range are clipped to the unit interval
    return min(max((float(value) - stats.min) / rng, 0.0), 1.0)


def cosine_distance(u: Mapping, t: Mapping, cfg: MetricConfig) -> float:
    dot = nu = nt = 0.0
    for var in cfg.variables:
        if not (_present(u, var) and _present(t, var)):
            continue
        w = cfg.weight(var)
        if var in cfg.categorical:
            a, b = 1.0, 1.0 if u[var] == t[var] else 0.0
        else:
            a, b = _unit(u[var], cfg.stats[var]), _unit(t[var], cfg.stats[var])
        dot += w * a * b
        nu += w * a * a
        nt += w * b * b
    if nu == 0 or nt == 0:
        raise IncomparableError("zero-norm encoded vector: angle undefined")
    return 1.0 - dot / (math.sqrt(nu) * math.sqrt(nt))


def distance(u: Mapping, t: Mapping, cfg: MetricConfig) -> float:
    return {"gower": gower_distance, "hamming": hamming_distance,
            "cosine": cosine_distance}[cfg.kind](u, t, cfg)


# -- vectorised path -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EncodedRows:
    """Dataset rows laid out for the dissimilarity kernel."""

    cat_vars: tuple[str, ...]
    num_vars: tuple[str, ...]
    vocab: tuple[dict, ...]
    cat: np.ndarray
    num: np.ndarray

    @classmethod
    def build(cls, data: Dataset, cfg: MetricConfig) -> "EncodedRows":
        cat_vars = tuple(v for v in cfg.variables if v in cfg.categorical)
        num_vars = tuple(v for v in cfg.variables if v not in cfg.categorical)
        vocab = tuple({lab: i for i, lab in enumerate(data.labels(v))} for v in cat_vars)
        cat = np.full((data.n_rows, len(cat_vars)), -1, dtype=np.int32)
        for j, v in enumerate(cat_vars):
            cat[:, j] = [vocab[j].get(x, -1) for x in data.frame[v]]
        num = np.ascontiguousarray(data.frame[list(num_vars)].to_numpy(dtype=float)) if num_vars \
            else np.zeros((data.n_rows, 0))
        return cls(cat_vars, num_vars, vocab, np.ascontiguousarray(cat), num)

    def encode(self, record: Mapping):
        tcat = np.full(len(self.cat_vars), -1, dtype=np.int32)
        for j, v in enumerate(self.cat_vars):
            if _present(record, v):
                # unseen labels get a code no row carries
                tcat[j] = self.vocab[j].get(record[v], len(self.vocab[j]))
        tnum = np.array([float(record[v]) if _present(record, v) else np.nan for v in self.num_vars])
        return tcat, tnum


def distances_to(data: Dataset, record: Mapping, cfg: MetricConfig,
                 encoded: EncodedRows | None = None) -> np.ndarray:
    """Distance from ``record`` to every row of ``data``.

    For cosine, a pair whose encoded vector has zero norm gets distance 1.
    """
    enc = encoded or EncodedRows.build(data, cfg)
    tcat, tnum = enc.encode(record)
    wcat = np.array([cfg.weight(v) for v in enc.cat_vars])
    wnum = np.array([cfg.weight(v) for v in enc.num_vars])
    if cfg.kind == "cosine":
        return _cosine_rows(enc, tcat, tnum, wcat, wnum, cfg)
    scale = np.array([cfg.scale(v) for v in enc.num_vars])
    sd, sw = kernels.mixed_dissimilarity(enc.cat, enc.num, tcat, tnum, wcat, wnum, scale)
    if cfg.kind == "hamming":
        return sd
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(sw > 0, sd / np.where(sw > 0, sw, 1.0), np.nan)


def _cosine_rows(enc, tcat, tnum, wcat, wnum, cfg) -> np.ndarray:
    n = enc.cat.shape[0]
    dot = np.zeros(n)
    nu = np.zeros(n)
    nt = np.zeros(n)
    if enc.cat_vars:
        ok = (enc.cat >= 0) & (tcat >= 0)[None, :]
        w = np.where(ok, wcat[None, :], 0.0)
        match = (enc.cat == tcat[None, :]).astype(float)
        dot += (w * match).sum(axis=1)
        nu += w.sum(axis=1)
        nt += (w * match).sum(axis=1)
    if enc.num_vars:
        lo = np.array([cfg.stats[v].min for v in enc.num_vars])
        rng = np.array([cfg.stats[v].max - cfg.stats[v].min for v in enc.num_vars])
        safe = np.where(rng > 0, rng, 1.0)
        a = np.where(rng > 0, np.clip((tnum - lo) / safe, 0.0, 1.0), 0.0)
        b = np.where(rng[None, :] > 0, np.clip((enc.num - lo) / safe, 0.0, 1.0), 0.0)
        ok = ~np.isnan(enc.num) & ~np.isnan(tnum)[None, :]
        w = np.where(ok, wnum[None, :], 0.0)
        a_row = np.where(ok, a[None, :], 0.0)
        b = np.where(ok, b, 0.0)
        dot += (w * a_row * b).sum(axis=1)
        nu += (w * a_row * a_row).sum(axis=1)
        nt += (w * b * b).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = dot / (np.sqrt(nu) * np.sqrt(nt))
    return np.where((nu > 0) & (nt > 0), 1.0 - cos, 1.0)


def nearest_analogues(data: Dataset, target, cfg: MetricConfig, n: int,
                      exclude: Sequence[str] = (), encoded: EncodedRows | None = None):
    """Indices and distances of the ``n`` rows closest to ``target``.

    ``target`` is a row index of ``data`` (that row is never returned) or an
    external record.  Variables in ``exclude`` are ignored when comparing.
    Ties are broken by row index.
    """
    if exclude:
        cfg = cfg.without(exclude)
        encoded = None
    if isinstance(target, (int, np.integer)):
        record = data.record(int(target))
        skip = int(target)
    else:
        record = dict(target)
        skip = None
    available = data.n_rows - (1 if skip is not None else 0)
    if n > available or n < 1:
        raise ConfigError(f"cannot return {n} analogues from {available} candidate rows")
    d = distances_to(data, record, cfg, encoded)
    d = np.where(np.isnan(d), np.inf, d)
    idx = np.arange(data.n_rows)
    if skip is not None:
        keep = idx != skip
        idx, d = idx[keep], d[keep]
    order = np.lexsort((idx, d))[:n]
    return idx[order], d[order]


def distance_matrix(data: Dataset, cfg: MetricConfig) -> np.ndarray:
    enc = EncodedRows.build(data, cfg)
    return np.vstack([distances_to(data, data.record(i), cfg, enc) for i in range(data.n_rows)])
