"""Hill-climbing structure search and maximum-likelihood parameter fitting."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from resbn.data import Dataset, VariableSpec, is_missing
from resbn.discretize import TableDiscretizer, parse_label
from resbn.distributions import (CPT, VAR_FLOOR, ConditionalGaussian, LinearGaussian,
                                 distribution_from_json, fit_cpt, fit_grouped_regressions)
from resbn.errors import ConfigError, FitError
from resbn.graph import Dag, EdgeConstraints
from resbn.score import EncodedData, Scorer, base_kind, resolve_discretizer

MOVE_TOL = 1e-10


def default_max_parents(kind: str) -> int:
    return 3 if base_kind(kind) == "mi" else 4


@dataclass(frozen=True)
class LearnConfig:
    """Knobs of one network-building run."""

    score: str = "k2"
    disc: str = "kmeans5"
    max_parents: int | None = None
    constraints: EdgeConstraints = field(default_factory=EdgeConstraints)
    alpha: float = 1.0
    var_floor: float = VAR_FLOOR
    complete_case: bool = True

    def __post_init__(self):
        base_kind(self.score)
        parse_label(self.disc)
        if self.max_parents is not None and self.max_parents < 1:
            raise ConfigError("max_parents must be positive")
        if self.alpha < 0:
            raise ConfigError("alpha must be nonnegative")

    @property
    def parents_cap(self) -> int:
        return self.max_parents if self.max_parents is not None else default_max_parents(self.score)

    def to_json(self) -> dict:
        return {"score": self.score, "disc": self.disc, "max_parents": self.parents_cap,
                "constraints": self.constraints.to_json(), "alpha": self.alpha,
                "var_floor": self.var_floor, "complete_case": self.complete_case}

    @classmethod
    def from_json(cls, obj: Mapping) -> "LearnConfig":
        return cls(obj["score"], obj["disc"], obj.get("max_parents"),
                   EdgeConstraints.from_json(obj.get("constraints")), obj.get("alpha", 1.0),
                   obj.get("var_floor", VAR_FLOOR), obj.get("complete_case", True))


def fingerprint(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# -- structure search ------------------------------------------------------

def _closure(children: list[set]) -> list[set]:
    """reach[i] = nodes reachable from i (including i)."""
    p = len(children)
    reach = []
    for s in range(p):
        seen = {s}
        stack = [s]
        while stack:
            u = stack.pop()
            for w in children[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        reach.append(seen)
    return reach


def _check_constraints(enc: EncodedData, constraints: EdgeConstraints, cap: int):
    idx = {n: i for i, n in enumerate(enc.names)}
    parents = [set() for _ in enc.names]
    for a, b in list(constraints.required) + list(constraints.forbidden):
        if a not in idx or b not in idx:
            raise ConfigError(f"constraint edge {a}->{b} names an unknown variable")
    for a, b in constraints.required:
        if enc.categorical[idx[b]] and not enc.categorical[idx[a]]:
            raise ConfigError(f"required edge {a}->{b}: a discrete node cannot have a continuous parent")
        parents[idx[b]].add(idx[a])
    for i, ps in enumerate(parents):
        if len(ps) > cap:
            raise ConfigError(f"required edges give {enc.names[i]!r} more than {cap} parents")
    return parents


def hill_climb(data: Dataset, score: str = "k2", discretizer=None,
               constraints: EdgeConstraints | None = None, max_parents: int | None = None,
               encoded: EncodedData | None = None) -> Dag:
    """Greedy best-improvement search over single-edge add/delete/reverse moves.

    Starts from the graph holding exactly the required edges.  Each sweep
    applies the single legal move with the largest score gain; among equal
    gains the first in (move, parent, child) lexicographic order wins.  Stops
    when no legal move improves the score.
    """
    constraints = constraints or EdgeConstraints()
    cap = max_parents if max_parents is not None else default_max_parents(score)
    if len(data.schema) < 2:
        raise ConfigError("structure search needs at least two variables")
    enc = encoded or EncodedData.build(data, resolve_discretizer(data, discretizer))
    scorer = Scorer(enc, score)
    names = enc.names
    p = len(names)
    cat = enc.categorical
    idx = {n: i for i, n in enumerate(names)}
    parents = _check_constraints(enc, constraints, cap)
    required = {(idx[a], idx[b]) for a, b in constraints.required}
    forbidden = {(idx[a], idx[b]) for a, b in constraints.forbidden}
    children = [set() for _ in range(p)]
    for c, ps in enumerate(parents):
        for u in ps:
            children[u].add(c)
    fam = [scorer.family(i, parents[i]) for i in range(p)]
    order = sorted(range(p), key=lambda i: names[i])
    pairs = [(u, v) for u in order for v in order if u != v]

    while True:
        reach = _closure(children)
        best_delta, best = MOVE_TOL, None
        # move kinds in lexicographic order: add < delete < reverse
        for u, v in pairs:
            if u in parents[v] or v in parents[u]:
                continue
            if (u, v) in forbidden or len(parents[v]) >= cap or (cat[v] and not cat[u]):
                continue
            if u in reach[v]:
                continue
            delta = scorer.family(v, parents[v] | {u}) - fam[v]
            if delta > best_delta:
                best_delta, best = delta, ("add", u, v)
        for u, v in pairs:
            if u not in parents[v] or (u, v) in required:
                continue
            delta = scorer.family(v, parents[v] - {u}) - fam[v]
            if delta > best_delta:
                best_delta, best = delta, ("delete", u, v)
        for u, v in pairs:
            if u not in parents[v] or (u, v) in required or (v, u) in forbidden:
                continue
            if len(parents[u]) >= cap or (cat[u] and not cat[v]):
                continue
            if any(v in reach[w] for w in children[u] if w != v):
                continue
            delta = (scorer.family(v, parents[v] - {u}) - fam[v]
                     + scorer.family(u, parents[u] | {v}) - fam[u])
            if delta > best_delta:
                best_delta, best = delta, ("reverse", u, v)
        if best is None:
            break
        kind, u, v = best
        if kind == "add":
            parents[v].add(u)
            children[u].add(v)
        elif kind == "delete":
            parents[v].discard(u)
            children[u].discard(v)
        else:
            parents[v].discard(u)
            children[u].discard(v)
            parents[u].add(v)
            children[v].add(u)
            fam[u] = scorer.family(u, parents[u])
        fam[v] = scorer.family(v, parents[v])

    edges = frozenset((names[u], names[c]) for c, ps in enumerate(parents) for u in ps)
    return Dag(tuple(names), edges)


# -- parameters --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BayesNet:
    dag: Dag
    dists: Mapping[str, object]
    schema: tuple[VariableSpec, ...]
    n_rows: int
    meta: Mapping = field(default_factory=dict)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.schema]

    def spec(self, name: str) -> VariableSpec:
        for s in self.schema:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "schema": [s.to_json() for s in self.schema],
            "dag": self.dag.to_json(),
            "dists": {k: self.dists[k].to_json() for k in sorted(self.dists)},
            "n_rows": self.n_rows,
            "meta": dict(self.meta),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "BayesNet":
        schema = tuple(VariableSpec.from_json(s) for s in obj["schema"])
        dag = Dag.from_json(obj["dag"])
        order = [s.name for s in schema]
        dag = Dag(tuple(order), dag.edges)
        dists = {k: distribution_from_json(v) for k, v in obj["dists"].items()}
        return cls(dag, dists, schema, int(obj["n_rows"]), dict(obj.get("meta", {})))


def fit_parameters(dag: Dag, data: Dataset, alpha: float = 1.0, var_floor: float = VAR_FLOOR,
                   meta: Mapping | None = None) -> BayesNet:
    """Fit CPTs (additive smoothing ``alpha``) and conditional-Gaussian regressions."""
    frame = data.frame
    dists = {}
    for name in dag.nodes:
        spec = data.spec(name)
        ps = dag.parents(name)
        col = frame[name]
        if col.notna().sum() == 0:
            raise FitError(f"variable {name!r} has no observed rows")
        ok = col.notna().to_numpy()
        for p in ps:
            ok &= frame[p].notna().to_numpy()
        pspecs = [data.spec(p) for p in ps]
        if spec.is_categorical:
            bad = [p.name for p in pspecs if not p.is_categorical]
            if bad:
                raise FitError(f"discrete node {name!r} has continuous parents {bad}")
            rows = np.flatnonzero(ok)
            child = col.to_numpy()[rows]
            pcols = [frame[p].to_numpy()[rows] for p in ps]
            dists[name] = fit_cpt(child, pcols, ps, data.labels(name), alpha)
        else:
            disc = [p.name for p in pspecs if p.is_categorical]
            cont = [p.name for p in pspecs if not p.is_categorical]
            rows = np.flatnonzero(ok)
            if rows.size == 0:
                y = col.to_numpy(dtype=float)
                y = y[~np.isnan(y)]
                pooled = LinearGaussian(float(y.mean()), tuple(0.0 for _ in cont),
                                        max(float(y.var()), var_floor))
                dists[name] = ConditionalGaussian(tuple(disc), tuple(cont), {}, pooled)
                continue
            y = col.to_numpy(dtype=float)[rows]
            x = np.column_stack([frame[c].to_numpy(dtype=float)[rows] for c in cont]) if cont \
                else np.zeros((rows.size, 0))
            keys = list(zip(*[frame[d].to_numpy()[rows] for d in disc])) if disc else [()] * rows.size
            table, pooled = fit_grouped_regressions(y, x, keys, var_floor)
            dists[name] = ConditionalGaussian(tuple(disc), tuple(cont), table, pooled)
    return BayesNet(dag, dists, tuple(data.schema), data.n_rows, dict(meta or {}))


def log_likelihood(bn: BayesNet, data: Dataset) -> float:
    """Sum over nodes and family-complete rows of log p(child | parents)."""
    total = 0.0
    frame = data.frame
    for name in bn.dag.nodes:
        dist = bn.dists[name]
        ps = bn.dag.parents(name)
        ok = frame[name].notna().to_numpy()
        for p in ps:
            ok &= frame[p].notna().to_numpy()
        rows = np.flatnonzero(ok)
        if isinstance(dist, CPT):
            pos = {s: i for i, s in enumerate(dist.states)}
            for i in rows:
                cfg = tuple(frame[p].iat[i] for p in dist.parents)
                total += math.log(dist.probs(cfg)[pos[frame[name].iat[i]]])
        else:
            y = frame[name].to_numpy(dtype=float)
            groups: dict[tuple, list[int]] = {}
            for i in rows:
                groups.setdefault(tuple(frame[d].iat[i] for d in dist.discrete_parents), []).append(i)
            for key, idx in groups.items():
                idx = np.asarray(idx)
                x = np.column_stack([frame[c].to_numpy(dtype=float)[idx] for c in dist.continuous_parents]) \
                    if dist.continuous_parents else np.zeros((idx.size, 0))
                total += dist.regression(key).loglik(y[idx], x)
    return total


def prepare_training(data: Dataset, complete_case: bool = True) -> Dataset:
    """Default learning path: drop rows missing any modelled variable."""
    return data.complete_cases() if complete_case else data


def learn_network(data: Dataset, config: LearnConfig | None = None,
                  exclude: Sequence[str] = ()) -> BayesNet:
    """Discretize, search structure, then fit parameters on raw values."""
    config = config or LearnConfig()
    names = [n for n in data.names if n not in set(exclude)]
    train = prepare_training(data.select(names), config.complete_case)
    if train.n_rows == 0:
        raise FitError("no complete rows to learn from")
    disc = TableDiscretizer.fit(train, *parse_label(config.disc))
    constraints = EdgeConstraints(
        frozenset(e for e in config.constraints.required if set(e) <= set(names)),
        frozenset(e for e in config.constraints.forbidden if set(e) <= set(names)))
    dag = hill_climb(train, config.score, disc, constraints, config.parents_cap)
    return fit_parameters(dag, train, config.alpha, config.var_floor,
                          meta={"config": fingerprint(config.to_json()),
                                "discretizer": disc.label})


def record_value(spec: VariableSpec, value):
    if value is None or is_missing(value):
        return None
    return str(value) if spec.is_categorical else float(value)
