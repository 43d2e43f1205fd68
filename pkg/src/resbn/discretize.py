"""Binning of continuous variables for discrete structure scores.

Bins are left-closed ``[lo, hi)`` except the last one, which is closed.
"""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from resbn.errors import ConfigError, DataError

STRATEGIES = ("quantile", "uniform", "kmeans")
_LABEL = re.compile(r"^(kmeans|quantile|uniform|[kqu])?(\d+)([kqu])?$")
_SHORT = {"k": "kmeans", "q": "quantile", "u": "uniform"}



@dataclass(frozen=True)
class Discretizer:
    strategy: str
    bins: int
    edges: tuple[float, ...]

    @property
    def n_bins(self) -> int:
        """Effective bin count (can be below ``bins`` after edge collapse)."""
        return len(self.edges) + 1

    def transform(self, value: float) -> int:
        return int(np.searchsorted(self.edges, value, side="right"))

    def transform_array(self, values: np.ndarray) -> np.ndarray:
        """Vectorised transform; NaN maps to -1."""
        values = np.asarray(values, dtype=float)
        out = np.searchsorted(np.asarray(self.edges), values, side="right").astype(np.int32)
        out[np.isnan(values)] = -1
        return out

    def to_json(self) -> dict:
        return {"strategy": self.strategy, "bins": self.bins, "edges": list(self.edges)}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Discretizer":
        return cls(obj["strategy"], int(obj["bins"]), tuple(float(e) for e in obj["edges"]))


def parse_label(label: str) -> tuple[str, int]:
    """``"kmeans5"``, ``"5k"``, ``"quantile10"``, ``"10q"`` -> (strategy, bins)."""
    m = _LABEL.match(label.strip().lower())
    if not m or (m.group(1) is None and m.group(3) is None) or (m.group(1) and m.group(3)):
        raise ConfigError(f"unrecognised discretization label {label!r}")
    key = m.group(1) or m.group(3)
    if int(m.group(2)) < 2:
        raise ConfigError(f"discretization label {label!r}: bins must be at least 2")
    return _SHORT.get(key, key), int(m.group(2))


def short_label(strategy: str, bins: int) -> str:
    return f"{bins}{strategy[0]}"


def _kmeans_1d(x: np.ndarray, k: int) -> np.ndarray:
    """Globally optimal 1-D k-means centroids by dynamic programming.

    Works on distinct values weighted by multiplicity so equal values never
    straddle an edge. Ties between splits go to the earliest one.
    """
    vals, counts = np.unique(x, return_counts=True)
    k = min(k, len(vals))
    v = vals - vals.mean()
    w = np.concatenate([[0.0], np.cumsum(counts)])
    s1 = np.concatenate([[0.0], np.cumsum(counts * v)])
    s2 = np.concatenate([[0.0], np.cumsum(counts * v * v)])
    m = len(vals)
    i = np.arange(m + 1)[:, None]
    j = np.arange(m + 1)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        cost = s2[j] - s2[i] - (s1[j] - s1[i]) ** 2 / (w[j] - w[i])
    cost = np.where(j > i, np.maximum(cost, 0.0), np.inf)
    best = cost[0].copy()
    back = np.zeros((k, m + 1), dtype=int)
    for level in range(1, k):
        total = best[:, None] + cost
        back[level] = np.argmin(total, axis=0)
        best = total[back[level], np.arange(m + 1)]
    bounds = [m]
    for level in range(k - 1, 0, -1):
        bounds.append(back[level][bounds[-1]])
    bounds.append(0)
    bounds = bounds[::-1]
    centers = [np.average(vals[a:b], weights=counts[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
    return np.array(centers)


def fit(values: Sequence[float], strategy: str = "kmeans", bins: int = 5) -> Discretizer:
    """Fit bin edges on observed values (NaN ignored)."""
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown discretization strategy {strategy!r}")
    if bins < 2:
        raise ConfigError("bins must be at least 2")
    x = np.asarray(values, dtype=float)
    x = x[~np.isnan(x)]
    if x.size == 0:
        raise DataError("cannot discretize an empty column")
    if strategy == "uniform":
        lo, hi = x.min(), x.max()
        edges = lo + np.arange(1, bins) * (hi - lo) / bins
    elif strategy == "quantile":
        edges = np.quantile(x, np.arange(1, bins) / bins)
    else:
        centers = _kmeans_1d(x, bins)
        edges = (centers[1:] + centers[:-1]) / 2.0
    edges = np.unique(edges)
    if strategy == "uniform" and x.min() == x.max():
        edges = edges[:0]
    if len(edges) + 1 < bins:
        warnings.warn(f"{strategy} discretization collapsed to {len(edges) + 1} bins "
                      f"(requested {bins})", RuntimeWarning, stacklevel=2)
    return Discretizer(strategy, bins, tuple(float(e) for e in edges))


def transform(d: Discretizer, value: float) -> int:
    return d.transform(value)


@dataclass(frozen=True)
class TableDiscretizer:
    """One fitted :class:`Discretizer` per continuous variable."""

    strategy: str
    bins: int
    columns: Mapping[str, Discretizer]

    @classmethod
    def fit(cls, dataset, strategy: str = "kmeans", bins: int = 5) -> "TableDiscretizer":
        cols = {}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for name in dataset.continuous_names():
                col = dataset.frame[name].to_numpy(dtype=float)
                if np.isnan(col).all():
                    continue
                cols[name] = fit(col, strategy, bins)
        return cls(strategy, bins, cols)

    @property
    def label(self) -> str:
        return short_label(self.strategy, self.bins)

    def to_json(self) -> dict:
        return {"strategy": self.strategy, "bins": self.bins,
                "columns": {k: v.to_json() for k, v in sorted(self.columns.items())}}

    @classmethod
    def from_json(cls, obj: Mapping) -> "TableDiscretizer":
        return cls(obj["strategy"], int(obj["bins"]),
                   {k: Discretizer.from_json(v) for k, v in obj["columns"].items()})
