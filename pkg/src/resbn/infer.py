"""Ancestral sampling with clamped evidence, and single-variable imputation.

Imputation samples the target from its parents' configuration with every
other modelled variable fixed to the record's values; evidence on the
target's descendants does not reweight the samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import pandas as pd

from resbn.data import is_missing
from resbn.distributions import CPT
from resbn.errors import ConfigError, DataError
from resbn.learn import BayesNet


def _check_evidence(bn: BayesNet, evidence: Mapping) -> dict:
    out = {}
    names = set(bn.names)
    for k, v in (evidence or {}).items():
        if k not in names or v is None or is_missing(v):
            continue
        spec = bn.spec(k)
        if spec.is_categorical:
            if not isinstance(v, str):
                raise DataError(f"evidence for categorical {k!r} must be a label, got {v!r}")
            out[k] = v
        else:
            if isinstance(v, (str, bool)):
                raise DataError(f"evidence for continuous {k!r} must be a number, got {v!r}")
            out[k] = float(v)
    return out


def _group_rows(cols: list[np.ndarray], n: int) -> dict[tuple, np.ndarray]:
    if not cols:
        return {(): np.arange(n)}
    groups: dict[tuple, list[int]] = {}
    for i, key in enumerate(zip(*cols)):
        groups.setdefault(key, []).append(i)
    return {k: np.asarray(v) for k, v in groups.items()}


def sample(bn: BayesNet, n: int, evidence: Mapping | None = None, seed: int = 0) -> pd.DataFrame:
    """Draw ``n`` complete records in ancestral order; evidenced nodes stay fixed."""
    if n < 1:
        raise ConfigError("n must be at least 1")
    ev = _check_evidence(bn, evidence or {})
    rng = np.random.default_rng(seed)
    out: dict[str, np.ndarray] = {}
    for name in bn.dag.topological_order():
        spec = bn.spec(name)
        if name in ev:
            out[name] = np.full(n, ev[name], dtype=object if spec.is_categorical else float)
            continue
        dist = bn.dists[name]
        if isinstance(dist, CPT):
            col = np.empty(n, dtype=object)
            groups = _group_rows([out[p] for p in dist.parents], n)
            states = np.asarray(dist.states, dtype=object)
            for key, idx in groups.items():
                col[idx] = states[rng.choice(len(states), size=len(idx), p=dist.probs(key))]
            out[name] = col
        else:
            col = np.empty(n)
            groups = _group_rows([out[p] for p in dist.discrete_parents], n)
            for key, idx in groups.items():
                reg = dist.regression(key)
                x = np.column_stack([out[c][idx] for c in dist.continuous_parents]) \
                    if dist.continuous_parents else np.zeros((len(idx), 0))
                col[idx] = reg.mean(x) + math.sqrt(reg.variance) * rng.standard_normal(len(idx))
            out[name] = col
    return pd.DataFrame({k: out[k] for k in bn.names})


@dataclass
class PredictionSummary:
    target: str
    categorical: bool
    n: int
    samples: np.ndarray = field(repr=False)
    mean: float | None = None
    std: float | None = None
    p025: float | None = None
    p975: float | None = None
    mean_ci: tuple[float, float] | None = None
    mode: str | None = None
    frequencies: dict[str, float] | None = None

    @property
    def value(self):
        return self.mode if self.categorical else self.mean

    def to_json(self, include_samples: bool = False) -> dict:
        out = {"target": self.target, "kind": "categorical" if self.categorical else "continuous",
               "n": self.n}
        if self.categorical:
            out.update(mode=self.mode, frequencies=self.frequencies)
        else:
            out.update(mean=self.mean, std=self.std, p025=self.p025, p975=self.p975,
                       mean_ci=list(self.mean_ci))
        if include_samples:
            out["samples"] = [v if self.categorical else float(v) for v in self.samples]
        return out


def summarize(target: str, values: np.ndarray, categorical: bool) -> PredictionSummary:
    n = len(values)
    if categorical:
        labels, counts = np.unique(np.asarray(values, dtype=str), return_counts=True)
        freqs = {str(l): float(c) / n for l, c in zip(labels, counts)}
        # ties go to the alphabetically first label
        mode = str(labels[int(np.argmax(counts))])
        return PredictionSummary(target, True, n, np.asarray(values, dtype=object),
                                 mode=mode, frequencies=freqs)
    x = np.asarray(values, dtype=float)
    mean = float(x.mean())
    std = float(x.std(ddof=1)) if n > 1 else 0.0
    half = 1.96 * std / math.sqrt(n)
    return PredictionSummary(target, False, n, x, mean=mean, std=std,
                             p025=float(np.percentile(x, 2.5)), p975=float(np.percentile(x, 97.5)),
                             mean_ci=(mean - half, mean + half))


def impute(bn: BayesNet, record: Mapping, target: str, n: int = 500, seed: int = 0):
    """Predict ``target`` from the rest of ``record``: mode or mean of ``n`` samples."""
    if target not in bn.names:
        raise ConfigError(f"target {target!r} is not modelled by this network")
    if target in record and not is_missing(record[target]) and record[target] is not None:
        raise ConfigError(f"target {target!r} is present in the evidence")
    ev = {k: v for k, v in record.items() if k != target}
    draws = sample(bn, n, ev, seed)[target].to_numpy()
    summary = summarize(target, draws, bn.spec(target).is_categorical)
    return summary.value, summary
