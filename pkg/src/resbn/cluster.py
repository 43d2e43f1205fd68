"""Reservoir clustering by network structure, and filter-value clusters.

Structure clustering learns one network per row from that row's nearest
analogues, compares the networks by structural Hamming distance and cuts an
average-linkage tree.  Filter clustering learns one network per value of a
chosen variable and groups values whose networks look alike.  Both end with
one fitted network per cluster, and imputation routes a record to a cluster
first.
"""
from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.cluster.hierarchy import linkage as _scipy_linkage
from scipy.spatial.distance import squareform

from resbn.data import Dataset, is_missing
from resbn.discretize import Discretizer, fit as fit_discretizer, parse_label
from resbn.errors import ConfigError, DataError
from resbn.graph import Dag, hamming_matrix
from resbn.infer import impute, sample
from resbn.learn import BayesNet, LearnConfig, hill_climb, learn_network, prepare_training
from resbn.similarity import MetricConfig, distances_to, nearest_analogues

LINKAGES = ("average", "complete", "single")
MIN_FIT_SIZE = 10
OTHER = "__other__"


# -- agglomerative clustering --------------------------------------------------

def _canonical(labels: Sequence[int]) -> np.ndarray:
    """Renumber labels by order of first appearance."""
    seen: dict[int, int] = {}
    return np.array([seen.setdefault(int(l), len(seen)) for l in labels], dtype=int)


def linkage_matrix(dist: np.ndarray, method: str = "average") -> np.ndarray:
    dist = np.asarray(dist, dtype=float)
    if method not in LINKAGES:
        raise ConfigError(f"unknown linkage {method!r}; expected one of {LINKAGES}")
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise ConfigError("distance matrix must be square")
    if not np.allclose(dist, dist.T) or np.any(np.diag(dist) != 0):
        raise ConfigError("distance matrix must be symmetric with a zero diagonal")
    if dist.shape[0] < 2:
        return np.zeros((0, 4))
    return _scipy_linkage(squareform(dist, checks=False), method=method)


def cut_tree(z: np.ndarray, n: int, k: int | None = None, height: float | None = None) -> np.ndarray:
    """Labels after applying merges of ``z`` until ``k`` clusters remain or
    every merge up to ``height`` is done."""
    if (k is None) == (height is None):
        raise ConfigError("give exactly one of k or height")
    if k is not None and not 1 <= k <= n:
        raise ConfigError(f"cannot cut {n} items into {k} clusters")
    parent = list(range(2 * n - 1)) if n else []

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    steps = n - k if k is not None else int(np.sum(z[:, 2] <= height))
    for s in range(steps):
        a, b = int(z[s, 0]), int(z[s, 1])
        parent[find(a)] = n + s
        parent[find(b)] = n + s
    return _canonical([find(i) for i in range(n)])


def hierarchical_cluster(dist: np.ndarray, linkage: str = "average", k: int | None = None,
                         height: float | None = None):
    """Agglomerative clustering of a distance matrix; returns (labels, merge tree)."""
    n = np.asarray(dist).shape[0]
    z = linkage_matrix(dist, linkage)
    return cut_tree(z, n, k=k, height=height), z


def merge_steps(z: np.ndarray) -> list[tuple[int, int, int, float]]:
    """Dendrogram as (step, cluster_a, cluster_b, height) rows."""
    return [(s, int(r[0]), int(r[1]), float(r[2])) for s, r in enumerate(z)]


def merge_small(labels: np.ndarray, dist: np.ndarray, min_size: int) -> np.ndarray:
    """Fold clusters smaller than ``min_size`` into the nearest cluster by
    average inter-cluster distance, smallest first."""
    labels = np.asarray(labels).copy()
    while True:
        counts = Counter(labels.tolist())
        if len(counts) < 2:
            break
        small = sorted((c, lab) for lab, c in counts.items() if c < min_size)
        if not small:
            break
        _, lab = small[0]
        members = labels == lab
        best, best_d = None, np.inf
        for other in sorted(counts):
            if other == lab:
                continue
            d = float(dist[np.ix_(members, labels == other)].mean())
            if d < best_d:
                best, best_d = other, d
        warnings.warn(f"cluster of {counts[lab]} rows is below the minimum fit size "
                      f"{min_size}; merged into a neighbouring cluster", RuntimeWarning, stacklevel=2)
        labels[members] = best
    return _canonical(labels)


# -- structure clusters --------------------------------------------------------

def _assign(train: Dataset, labels: np.ndarray, cfg: MetricConfig, record: Mapping, k: int) -> int:
    d = distances_to(train, record, cfg)
    d = np.where(np.isnan(d), np.inf, d)
    order = np.lexsort((np.arange(len(d)), d))[:k]
    votes = Counter(labels[order].tolist())
    sizes = Counter(labels.tolist())
    top = max(votes.values())
    tied = [lab for lab, v in votes.items() if v == top]
    return int(min(tied, key=lambda lab: (-sizes[lab], lab)))


@dataclass(eq=False)
class StructureClusterModel:
    train: Dataset
    dags: list[Dag]
    hamming: np.ndarray
    linkage: np.ndarray
    k: int
    labels: np.ndarray
    networks: dict[int, BayesNet]
    metric: str = "gower"
    analogue_n: int = 60
    k_assign: int = 5
    meta: dict = field(default_factory=dict)

    def assign(self, record: Mapping, k_assign: int | None = None) -> int:
        return assign_cluster(self, record, k_assign)

    def impute(self, record: Mapping, target: str, n: int = 500, seed: int = 0):
        return impute(self.networks[self.assign(record)], record, target, n, seed)


def _row_dag(data: Dataset, i: int, cfg: MetricConfig, n: int, lc: LearnConfig) -> Dag:
    idx, _ = nearest_analogues(data, i, cfg, n)
    sub = data.subset(idx)
    return hill_climb(sub, lc.score, lc.disc, lc.constraints, lc.parents_cap)


def build_structure_clusters(data: Dataset, analogue_n: int = 60, metric: str = "gower", k: int = 3,
                             learn_cfg: LearnConfig | None = None, min_size: int = MIN_FIT_SIZE,
                             linkage: str = "average", k_assign: int = 5,
                             jobs: int = 1) -> StructureClusterModel:
    lc = learn_cfg or LearnConfig()
    train = prepare_training(data, lc.complete_case)
    if analogue_n >= train.n_rows:
        raise ConfigError(f"analogue_n={analogue_n} must be below the {train.n_rows} training rows")
    if k > train.n_rows:
        raise ConfigError(f"cannot form {k} clusters from {train.n_rows} rows")
    cfg = MetricConfig.from_dataset(train, metric)
    if jobs == 1:
        dags = [_row_dag(train, i, cfg, analogue_n, lc) for i in range(train.n_rows)]
    else:
        dags = Parallel(n_jobs=jobs)(delayed(_row_dag)(train, i, cfg, analogue_n, lc)
                                     for i in range(train.n_rows))
    ham = hamming_matrix(dags).astype(float)
    labels, z = hierarchical_cluster(ham, linkage, k=k)
    labels = merge_small(labels, ham, min_size)
    networks = {int(c): learn_network(train.subset(np.flatnonzero(labels == c)), lc)
                for c in np.unique(labels)}
    return StructureClusterModel(train, dags, ham, z, k, labels, networks, metric, analogue_n,
                                 k_assign, meta={"learn": lc.to_json(), "linkage": linkage,
                                                 "min_size": min_size})


def assign_cluster(model: StructureClusterModel, record: Mapping, k_assign: int | None = None) -> int:
    """Majority cluster among the record's nearest training rows by Gower
    distance; ties go to the larger cluster, then the lower label."""
    cfg = MetricConfig.from_dataset(model.train, "gower")
    k = min(k_assign or model.k_assign, model.train.n_rows)
    return _assign(model.train, model.labels, cfg, record, k)


# -- filter clusters -----------------------------------------------------------

@dataclass(eq=False)
class FilterClusterModel:
    filter_var: str
    groups: dict[str, list[str]]
    group_dags: dict[str, Dag]
    group_sizes: dict[str, int]
    hamming: np.ndarray
    linkage: np.ndarray
    cut: int
    clusters: dict[int, list[str]]
    networks: dict[int, BayesNet]
    full: BayesNet
    binning: Discretizer | None = None
    cut_scores: dict[int, float] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def group_names(self) -> list[str]:
        return sorted(self.groups)

    def cluster_sizes(self) -> dict[int, int]:
        return {c: sum(self.group_sizes[g] for g in gs) for c, gs in self.clusters.items()}

    def largest_cluster(self) -> int:
        sizes = self.cluster_sizes()
        return min(sizes, key=lambda c: (-sizes[c], c))

    def filter_value(self, record: Mapping):
        v = record.get(self.filter_var)
        if v is None or is_missing(v):
            return None
        if self.binning is not None:
            return f"bin{self.binning.transform(float(v))}"
        return str(v)

    def route(self, record: Mapping) -> int:
        v = self.filter_value(record)
        group = None
        if v is not None:
            for g, values in self.groups.items():
                if v in values:
                    group = g
                    break
        if group is None:
            why = "is missing" if v is None else f"value {v!r} was not seen in training"
            warnings.warn(f"filter variable {self.filter_var!r} {why}; routing to the largest cluster",
                          RuntimeWarning, stacklevel=2)
            return self.largest_cluster()
        for c, gs in self.clusters.items():
            if group in gs:
                return c
        raise DataError(f"group {group!r} belongs to no cluster")


def _filter_labels(data: Dataset, var: str, disc_label: str):
    spec = data.spec(var)
    col = data.frame[var]
    if spec.is_categorical:
        return [None if is_missing(v) else str(v) for v in col], None
    strategy, bins = parse_label(disc_label)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        d = fit_discretizer(col.to_numpy(dtype=float), strategy, bins)
    return [None if is_missing(v) else f"bin{d.transform(float(v))}" for v in col], d


def _pool_groups(values: Sequence, min_size: int) -> dict[str, list[str]]:
    counts = Counter(v for v in values if v is not None)
    groups = {v: [v] for v, c in counts.items() if c >= min_size}
    small = sorted(v for v, c in counts.items() if c < min_size)
    if small:
        groups[OTHER] = small
    return groups


def _cluster_networks(train: Dataset, values: Sequence, groups, clusters, lc, exclude):
    nets = {}
    for c, gs in clusters.items():
        members = {v for g in gs for v in groups[g]}
        rows = [i for i, v in enumerate(values) if v in members]
        nets[c] = learn_network(train.subset(rows), lc, exclude=exclude)
    return nets


def _clusters_for_cut(labels: np.ndarray, names: list[str]) -> dict[int, list[str]]:
    out: dict[int, list[str]] = {}
    for g, lab in zip(names, labels):
        out.setdefault(int(lab), []).append(g)
    return out


def _fit_filter(train: Dataset, var: str, lc: LearnConfig, min_size: int, linkage: str):
    values, binning = _filter_labels(train, var, lc.disc)
    groups = _pool_groups(values, min_size)
    names = sorted(groups)
    dags = {}
    sizes = {}
    for g in names:
        rows = [i for i, v in enumerate(values) if v in set(groups[g])]
        sizes[g] = len(rows)
        sub = train.subset(rows).select([n for n in train.names if n != var])
        dags[g] = hill_climb(sub, lc.score, lc.disc, lc.constraints, lc.parents_cap)
    ham = hamming_matrix([dags[g] for g in names]).astype(float)
    z = linkage_matrix(ham, linkage)
    return values, binning, groups, names, dags, sizes, ham, z


def _cut_score(model: FilterClusterModel, test: Dataset, n: int, seed: int) -> float:
    from resbn.evaluation import nrmse_table

    preds = {}
    for i in range(test.n_rows):
        rec = test.record(i)
        c = model.route(rec)
        for j, var in enumerate(test.continuous_names()):
            if var not in rec or var == model.filter_var:
                continue
            ev = {k: v for k, v in rec.items() if k != var}
            s = int(np.random.SeedSequence([seed, i, j]).generate_state(1)[0])
            value, _ = impute(model.networks[c], ev, var, n, s)
            preds.setdefault(var, []).append((value, rec[var]))
    table = nrmse_table(preds, test)
    return float(np.mean(list(table.values()))) if table else float("inf")


def build_filter_clusters(data: Dataset, filter_var: str, learn_cfg: LearnConfig | None = None,
                          selection: str = "holdout", cut: int | None = None,
                          min_size: int = MIN_FIT_SIZE, linkage: str = "average",
                          holdout: float = 0.1, n_samples: int = 200, seed: int = 0) -> FilterClusterModel:
    """Networks per filter value, grouped by a dendrogram over their structures.

    ``selection`` picks the number of clusters: ``"holdout"`` evaluates every
    cut on a seeded held-out fraction (networks fitted on the rest) and keeps
    the lowest mean NRMSE; ``"fixed"`` uses ``cut`` as given.
    """
    lc = learn_cfg or LearnConfig()
    if filter_var not in data.names:
        raise ConfigError(f"unknown filter variable {filter_var!r}")
    if selection not in ("holdout", "fixed"):
        raise ConfigError(f"unknown cut selection {selection!r}")
    if selection == "fixed" and cut is None:
        raise ConfigError("fixed selection needs a cut")
    train = prepare_training(data, lc.complete_case)
    values, binning, groups, names, dags, sizes, ham, z = _fit_filter(train, filter_var, lc,
                                                                      min_size, linkage)
    full = learn_network(train, lc)
    g = len(names)
    if g == 1:
        warnings.warn(f"filter {filter_var!r} has a single group; the model is the full-data network",
                      RuntimeWarning, stacklevel=2)
    scores: dict[int, float] = {}
    if g == 1:
        chosen = 1
    elif selection == "fixed":
        if not 1 <= cut <= g:
            raise ConfigError(f"cut {cut} outside 1..{g}")
        chosen = cut
    else:
        rng = np.random.default_rng(seed)
        perm = rng.permutation(train.n_rows)
        n_test = max(1, int(round(holdout * train.n_rows)))
        fit_part, test_part = train.subset(np.sort(perm[n_test:])), train.subset(np.sort(perm[:n_test]))
        fvals, fbin, fgroups, fnames, fdags, fsizes, fham, fz = _fit_filter(fit_part, filter_var, lc,
                                                                            min_size, linkage)
        full_fit = learn_network(fit_part, lc)
        for k in range(1, len(fnames) + 1):
            clusters = _clusters_for_cut(cut_tree(fz, len(fnames), k=k), fnames)
            nets = _cluster_networks(fit_part, fvals, fgroups, clusters, lc, (filter_var,))
            m = FilterClusterModel(filter_var, fgroups, fdags, fsizes, fham, fz, k, clusters, nets,
                                   full_fit, fbin)
            scores[k] = _cut_score(m, test_part, n_samples, seed)
        # lowest score wins; ties go to fewer clusters
        best = min(scores, key=lambda k: (scores[k], k))
        chosen = min(best, g)
    clusters = _clusters_for_cut(cut_tree(z, g, k=chosen), names)
    nets = _cluster_networks(train, values, groups, clusters, lc, (filter_var,)) if g > 1 \
        else {0: learn_network(train, lc, exclude=(filter_var,))}
    return FilterClusterModel(filter_var, groups, dags, sizes, ham, z, chosen, clusters, nets, full,
                              binning, scores, meta={"learn": lc.to_json(), "selection": selection,
                                                     "linkage": linkage, "min_size": min_size})


def filter_route_impute(model: FilterClusterModel, record: Mapping, target: str, n: int = 500,
                        seed: int = 0):
    if target == model.filter_var:
        return impute(model.full, record, target, n, seed)
    return impute(model.networks[model.route(record)], record, target, n, seed)


def proportional_counts(sizes: Mapping[int, int], n: int) -> dict[int, int]:
    """Split ``n`` draws across clusters in proportion to their sizes
    (largest remainder, ties to the lower label)."""
    keys = sorted(sizes)
    total = sum(sizes[k] for k in keys)
    if total == 0:
        raise ConfigError("all clusters are empty")
    exact = {k: n * sizes[k] / total for k in keys}
    out = {k: int(np.floor(exact[k])) for k in keys}
    rest = n - sum(out.values())
    for k in sorted(keys, key=lambda k: (-(exact[k] - out[k]), k))[:rest]:
        out[k] += 1
    return out


def sample_proportional(model: FilterClusterModel, n: int, seed: int = 0):
    """Draw ``n`` records across cluster networks proportionally to cluster size."""
    import pandas as pd

    counts = proportional_counts(model.cluster_sizes(), n)
    parts = []
    for c in sorted(counts):
        if counts[c]:
            df = sample(model.networks[c], counts[c], seed=int(np.random.SeedSequence([seed, c]).generate_state(1)[0]))
            df.insert(0, "cluster", c)
            parts.append(df)
    return pd.concat(parts, ignore_index=True)
