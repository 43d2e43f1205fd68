"""Node distributions of a mixed network and the fitting routines behind them.

Discrete nodes carry a :class:`CPT`; continuous nodes a
:class:`ConditionalGaussian`, i.e. one :class:`LinearGaussian` regression on
the continuous parents per configuration of the discrete parents.  A purely
continuous family is the special case with a single, empty configuration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

VAR_FLOOR = 1e-6
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LinearGaussian:
    intercept: float
    coefs: tuple[float, ...]
    variance: float

    def mean(self, x: np.ndarray) -> np.ndarray:
        """Conditional mean for a (n, m) matrix of continuous-parent values."""
        x = np.asarray(x, dtype=float)
        if not self.coefs:
            return np.full(x.shape[0], self.intercept)
        return self.intercept + x @ np.asarray(self.coefs)

    def loglik(self, y: np.ndarray, x: np.ndarray) -> float:
        resid = np.asarray(y, dtype=float) - self.mean(x)
        n = resid.size
        return float(-0.5 * n * (LOG_2PI + math.log(self.variance)) - (resid @ resid) / (2.0 * self.variance))

    def to_json(self) -> dict:
        return {"intercept": self.intercept, "coefs": list(self.coefs), "variance": self.variance}

    @classmethod
    def from_json(cls, obj: Mapping) -> "LinearGaussian":
        return cls(float(obj["intercept"]), tuple(float(c) for c in obj["coefs"]), float(obj["variance"]))


def ols(y: np.ndarray, x: np.ndarray, var_floor: float = VAR_FLOOR) -> LinearGaussian:
    """Least-squares regression with intercept; variance is the MLE RSS/n, floored."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float).reshape(len(y), -1)
    n = len(y)
    if n == 0:
        raise ValueError("no rows to regress on")
    design = np.column_stack([np.ones(n), x])
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ beta
    var = max(float(resid @ resid) / n, var_floor)
    return LinearGaussian(float(beta[0]), tuple(float(b) for b in beta[1:]), var)


def fit_grouped_regressions(y: np.ndarray, x: np.ndarray, groups: Sequence[Hashable],
                            var_floor: float = VAR_FLOOR):
    """Per-group OLS with pooled fallback.

    Groups holding fewer than ``m + 2`` rows (m = number of regressors) use the
    pooled regression fitted on all rows.  Returns ``(per_group, pooled)``
    where ``per_group`` maps every observed group key to its regression.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float).reshape(len(y), -1)
    m = x.shape[1]
    pooled = ols(y, x, var_floor)
    index: dict[Hashable, list[int]] = {}
    for i, g in enumerate(groups):
        index.setdefault(g, []).append(i)
    per_group = {}
    for g, rows in index.items():
        if len(rows) < m + 2:
            per_group[g] = pooled
        else:
            rows = np.asarray(rows)
            per_group[g] = ols(y[rows], x[rows], var_floor)
    return per_group, pooled


@dataclass(frozen=True)
class GroupFit:
    """Summary of one discrete-parent configuration inside a mixed family."""

    n: int
    variance: float
    loglik: float


def grouped_fit_summary(y, x, groups, var_floor: float = VAR_FLOOR) -> list[GroupFit]:
    per_group, _ = fit_grouped_regressions(y, x, groups, var_floor)
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float).reshape(len(y), -1)
    index: dict[Hashable, list[int]] = {}
    for i, g in enumerate(groups):
        index.setdefault(g, []).append(i)
    out = []
    for g in sorted(index, key=repr):
        rows = np.asarray(index[g])
        lg = per_group[g]
        out.append(GroupFit(len(rows), lg.variance, lg.loglik(y[rows], x[rows])))
    return out


@dataclass(frozen=True)
class CPT:
    """Conditional probability table over ``states`` given discrete ``parents``.

    ``table`` holds rows for observed parent configurations only; an unseen
    configuration yields the uniform distribution, which is what additive
    smoothing gives for a configuration with zero counts.
    """

    parents: tuple[str, ...]
    states: tuple[str, ...]
    table: Mapping[tuple, tuple[float, ...]]
    alpha: float = 1.0

    def probs(self, config: tuple) -> np.ndarray:
        row = self.table.get(tuple(config))
        if row is None:
            return np.full(len(self.states), 1.0 / len(self.states))
        return np.asarray(row)

    def to_json(self) -> dict:
        return {
            "type": "cpt",
            "parents": list(self.parents),
            "states": list(self.states),
            "alpha": self.alpha,
            "table": [[list(k), list(v)] for k, v in sorted(self.table.items())],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "CPT":
        table = {tuple(k): tuple(float(p) for p in v) for k, v in obj["table"]}
        return cls(tuple(obj["parents"]), tuple(obj["states"]), table, float(obj["alpha"]))


def fit_cpt(child: Sequence[str], parent_cols: Sequence[Sequence[str]], parents: Sequence[str],
            states: Sequence[str], alpha: float = 1.0) -> CPT:
    states = tuple(states)
    pos = {s: i for i, s in enumerate(states)}
    counts: dict[tuple, np.ndarray] = {}
    for i, v in enumerate(child):
        key = tuple(col[i] for col in parent_cols)
        row = counts.get(key)
        if row is None:
            row = counts[key] = np.zeros(len(states))
        row[pos[v]] += 1.0
    table = {}
    for key, row in counts.items():
        total = row.sum() + alpha * len(states)
        table[key] = tuple(float(p) for p in (row + alpha) / total)
    return CPT(tuple(parents), states, table, alpha)


@dataclass(frozen=True)
class ConditionalGaussian:
    discrete_parents: tuple[str, ...]
    continuous_parents: tuple[str, ...]
    table: Mapping[tuple, LinearGaussian]
    pooled: LinearGaussian

    def regression(self, config: tuple) -> LinearGaussian:
        return self.table.get(tuple(config), self.pooled)

    @property
    def parents(self) -> tuple[str, ...]:
        return self.discrete_parents + self.continuous_parents

    def to_json(self) -> dict:
        return {
            "type": "conditional_gaussian",
            "discrete_parents": list(self.discrete_parents),
            "continuous_parents": list(self.continuous_parents),
            "pooled": self.pooled.to_json(),
            "table": [[list(k), v.to_json()] for k, v in sorted(self.table.items())],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ConditionalGaussian":
        table = {tuple(k): LinearGaussian.from_json(v) for k, v in obj["table"]}
        return cls(tuple(obj["discrete_parents"]), tuple(obj["continuous_parents"]), table,
                   LinearGaussian.from_json(obj["pooled"]))


def distribution_from_json(obj: Mapping):
    if obj["type"] == "cpt":
        return CPT.from_json(obj)
    if obj["type"] == "conditional_gaussian":
        return ConditionalGaussian.from_json(obj)
    raise ValueError(f"unknown distribution type {obj['type']!r}")
