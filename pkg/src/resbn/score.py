"""Decomposable structure scores: K2, BIC and mutual information, each in a
discrete form and (BIC, MI) a conditional-Gaussian mixed form.

All scores are maximised.  A family is scored on the rows where the child
and every parent are observed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from resbn import kernels
from resbn.data import Dataset
from resbn.discretize import TableDiscretizer
from resbn.distributions import VAR_FLOOR, GroupFit, grouped_fit_summary
from resbn.errors import ConfigError

SCORE_KINDS = ("k2", "bic", "mi", "bic_mixed", "mi_mixed")
_KERNEL_KIND = {"k2": kernels.K2, "bic": kernels.BIC, "mi": kernels.MI}


def base_kind(kind: str) -> str:
    if kind not in SCORE_KINDS:
        raise ConfigError(f"unknown score kind {kind!r}; expected one of {SCORE_KINDS}")
    return kind.replace("_mixed", "")


@dataclass(frozen=True, eq=False)
class EncodedData:
    """Integer-coded view of a dataset for structure search.

    Categorical columns are coded over their sorted observed labels;
    continuous columns over the bins of ``discretizer``.  Missing cells are
    coded -1.  ``values`` keeps the raw continuous values (NaN elsewhere).
    """

    names: tuple[str, ...]
    categorical: tuple[bool, ...]
    codes: np.ndarray
    arities: np.ndarray
    values: np.ndarray
    labels: dict = field(default_factory=dict)

    @classmethod
    def build(cls, dataset: Dataset, discretizer: TableDiscretizer | None) -> "EncodedData":
        n, p = dataset.n_rows, len(dataset.schema)
        codes = np.full((n, p), -1, dtype=np.int32)
        values = np.full((n, p), np.nan)
        arities = np.ones(p, dtype=np.int32)
        labels = {}
        cats = []
        for j, spec in enumerate(dataset.schema):
            col = dataset.frame[spec.name]
            if spec.is_categorical:
                labs = dataset.labels(spec.name)
                labels[spec.name] = labs
                pos = {lab: i for i, lab in enumerate(labs)}
                codes[:, j] = [pos.get(v, -1) for v in col]
                arities[j] = max(len(labs), 1)
            else:
                x = col.to_numpy(dtype=float)
                values[:, j] = x
                if discretizer is not None and spec.name in discretizer.columns:
                    d = discretizer.columns[spec.name]
                    codes[:, j] = d.transform_array(x)
                    arities[j] = d.n_bins
            cats.append(spec.is_categorical)
        return cls(tuple(dataset.names), tuple(cats), np.ascontiguousarray(codes), arities,
                   values, labels)

    def index(self, name: str) -> int:
        return self.names.index(name)

    @property
    def n_rows(self) -> int:
        return self.codes.shape[0]


@dataclass(frozen=True)
class FamilyStats:
    """Sufficient statistics of one family (child plus parent set).

    ``counts`` has one row per observed parent configuration and one column
    per child state (N_ijk); ``q`` counts all parent configurations and ``r``
    the child states.  For a continuous child in mixed evaluation, ``groups``
    summarises the per-configuration regressions.
    """

    child: str
    parents: tuple[str, ...]
    counts: np.ndarray
    r: int
    q: int
    n: int
    groups: tuple[GroupFit, ...] | None = None
    marginal_variance: float | None = None
    n_numeric_parents: int = 0
    q_discrete: int = 1

    @property
    def has_mixed(self) -> bool:
        return self.groups is not None


def family_stats(data: EncodedData, child: str, parents: Sequence[str], mixed: bool = False,
                 var_floor: float = VAR_FLOOR) -> FamilyStats:
    ci = data.index(child)
    pis = [data.index(p) for p in parents]
    sub = data.codes[:, [ci] + pis]
    ok = (sub >= 0).all(axis=1)
    r = int(data.arities[ci])
    q = int(np.prod([int(data.arities[p]) for p in pis])) if pis else 1
    groups = marginal = None
    n_num = 0
    q_disc = 1
    if mixed and not data.categorical[ci]:
        groups, marginal, n_num, q_disc, ok = _mixed_groups(data, ci, pis, var_floor)
        sub = data.codes[:, [ci] + pis]
    rows = sub[ok]
    n = rows.shape[0]
    if rows.size and not (mixed and not data.categorical[ci]):
        cfg = np.zeros(n, dtype=np.int64)
        for j, p in enumerate(pis):
            cfg = cfg * int(data.arities[p]) + rows[:, j + 1]
        uniq, inv = np.unique(cfg, return_inverse=True)
        counts = np.zeros((len(uniq), r))
        np.add.at(counts, (inv, rows[:, 0]), 1.0)
    else:
        counts = np.zeros((0, r))
    return FamilyStats(child, tuple(parents), counts, r, q, n, groups, marginal, n_num, q_disc)


def _mixed_groups(data: EncodedData, ci: int, pis: list[int], var_floor: float):
    disc = [p for p in pis if data.categorical[p]]
    cont = [p for p in pis if not data.categorical[p]]
    y = data.values[:, ci]
    ok = ~np.isnan(y)
    for p in disc:
        ok &= data.codes[:, p] >= 0
    for p in cont:
        ok &= ~np.isnan(data.values[:, p])
    y = y[ok]
    x = data.values[ok][:, cont]
    if disc:
        keys = [tuple(row) for row in data.codes[ok][:, disc]]
    else:
        keys = [()] * len(y)
    q_disc = int(np.prod([int(data.arities[p]) for p in disc])) if disc else 1
    if len(y) == 0:
        return (), var_floor, len(cont), q_disc, ok
    groups = tuple(grouped_fit_summary(y, x, keys, var_floor))
    marginal = max(float(np.var(y)), var_floor)
    return groups, marginal, len(cont), q_disc, ok


def k2_family(stats: FamilyStats) -> float:
    """Cooper-Herskovits log marginal likelihood of the family."""
    if stats.n == 0:
        return 0.0
    nij = stats.counts.sum(axis=1)
    return float(len(nij) * gammaln(stats.r) - gammaln(nij + stats.r).sum()
                 + gammaln(stats.counts + 1.0).sum())


def _discrete_loglik(stats: FamilyStats) -> float:
    c = stats.counts
    nij = c.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(c > 0, c * np.log(c / nij), 0.0)
    return float(terms.sum())


def bic_family(stats: FamilyStats, mode: str = "discrete") -> float:
    if stats.n == 0:
        return 0.0
    if mode == "discrete":
        return _discrete_loglik(stats) - 0.5 * math.log(stats.n) * stats.q * (stats.r - 1)
    if mode == "mixed":
        if not stats.has_mixed:
            raise ConfigError(f"mixed statistics unavailable for {stats.child!r}")
        ll = sum(g.loglik for g in stats.groups)
        return ll - 0.5 * math.log(stats.n) * stats.q_discrete * (stats.n_numeric_parents + 2)
    raise ConfigError(f"unknown mode {mode!r}")


def mi_family(stats: FamilyStats, mode: str = "discrete") -> float:
    """N times the mutual information between the child and its parent set."""
    if stats.n == 0 or not stats.parents:
        return 0.0
    if mode == "discrete":
        c = stats.counts
        nij = c.sum(axis=1, keepdims=True)
        nk = c.sum(axis=0, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(c > 0, c * np.log(c * stats.n / (nij * nk)), 0.0)
        return float(terms.sum())
    if mode == "mixed":
        if not stats.has_mixed:
            raise ConfigError(f"mixed statistics unavailable for {stats.child!r}")
        return float(sum(0.5 * g.n * math.log(stats.marginal_variance / g.variance) for g in stats.groups))
    raise ConfigError(f"unknown mode {mode!r}")


class Scorer:
    """Cached family scorer over one encoded training set."""

    def __init__(self, data: EncodedData, kind: str, var_floor: float = VAR_FLOOR):
        self.data = data
        self.kind = kind
        self.base = base_kind(kind)
        self.mixed = kind.endswith("_mixed")
        self.var_floor = var_floor
        self._cache: dict[tuple[int, tuple[int, ...]], float] = {}

    def family(self, child: int, parents: Sequence[int]) -> float:
        key = (child, tuple(sorted(parents)))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if self.mixed and not self.data.categorical[child]:
            stats = family_stats(self.data, self.data.names[child],
                                 [self.data.names[p] for p in key[1]], mixed=True,
                                 var_floor=self.var_floor)
            value = bic_family(stats, "mixed") if self.base == "bic" else mi_family(stats, "mixed")
        else:
            value = kernels.discrete_family_score(
                self.data.codes, child, np.asarray(key[1], dtype=np.int64),
                self.data.arities, _KERNEL_KIND[self.base])
        self._cache[key] = value
        return value

    def total(self, parent_sets: Sequence[Sequence[int]]) -> float:
        return float(sum(self.family(c, ps) for c, ps in enumerate(parent_sets)))


def resolve_discretizer(data: Dataset, discretizer) -> TableDiscretizer:
    """Accept a fitted table discretizer, a label such as ``"kmeans5"``, or None."""
    from resbn.discretize import parse_label

    if isinstance(discretizer, TableDiscretizer):
        return discretizer
    if discretizer is None:
        return TableDiscretizer.fit(data, "kmeans", 5)
    if isinstance(discretizer, str):
        strategy, bins = parse_label(discretizer)
        return TableDiscretizer.fit(data, strategy, bins)
    strategy, bins = discretizer
    return TableDiscretizer.fit(data, strategy, bins)


def total_score(g, data: Dataset, kind: str = "k2", discretizer=None) -> float:
    """Sum of family scores of DAG ``g`` on ``data``."""
    enc = EncodedData.build(data, resolve_discretizer(data, discretizer))
    scorer = Scorer(enc, kind)
    pm = g.parent_map()
    return scorer.total([[enc.index(p) for p in pm[name]] for name in enc.names])
