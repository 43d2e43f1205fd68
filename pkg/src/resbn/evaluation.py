"""Leave-one-out validation, grid experiments and the recovery-factor case study.

A *pipeline* turns a training table into something that can impute one
variable of a record: the full-data network, a network learned on the
record's nearest analogues, a structure-cluster model or a filter-cluster
model.  :func:`loo_evaluate` holds out each row in turn, builds the pipeline
on the remaining rows and imputes every observed variable of the held-out row
from the others.
"""
from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Sequence

import numpy as np
from joblib import Parallel, delayed

from resbn.data import OIL_RF, Dataset
from resbn.errors import ConfigError, DegenerateRangeError, ResbnError
from resbn.infer import impute
from resbn.learn import LearnConfig, fingerprint, learn_network, prepare_training
from resbn.similarity import METRICS, MetricConfig, nearest_analogues

PIPELINE_KINDS = ("full", "analogues", "structure", "filter")
GRID_SCORES = ("k2", "bic", "mi", "bic_mixed", "mi_mixed")
GRID_DISCS = ("5k", "10k", "5q", "10q", "5u", "10u")


def nrmse(pred, truth, rng: float) -> float:
    """Root-mean-square error divided by the variable's range."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape or pred.size == 0:
        raise ConfigError("predictions and truths need equal, nonzero length")
    if not rng > 0:
        raise DegenerateRangeError("range must be positive to normalise the error")
    return float(np.sqrt(np.mean((pred - truth) ** 2)) / rng)


def nrmse_table(preds: Mapping[str, list], data: Dataset) -> dict[str, float]:
    """Per-variable NRMSE from (prediction, truth) pairs, ranges taken from ``data``."""
    out = {}
    for var, pairs in preds.items():
        p, t = zip(*pairs)
        out[var] = nrmse(p, t, data.stats[var].range)
    return out


def accuracy(pred, truth) -> float:
    if len(pred) != len(truth) or not len(pred):
        raise ConfigError("predictions and truths need equal, nonzero length")
    return float(np.mean([a == b for a, b in zip(pred, truth)]))


def r_squared(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    ss_tot = float(((truth - truth.mean()) ** 2).sum())
    if ss_tot == 0:
        return float("nan")
    return 1.0 - float(((truth - pred) ** 2).sum()) / ss_tot


def fold_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def split(n: int, test_fraction: float = 0.2, seed: int = 0):
    """Seeded shuffled split of ``range(n)`` into sorted (train, test) indices."""
    if not 0 < test_fraction < 1:
        raise ConfigError("test fraction must lie strictly between 0 and 1")
    perm = np.random.default_rng(seed).permutation(n)
    n_test = max(1, int(round(test_fraction * n)))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


# -- pipelines -----------------------------------------------------------------

@dataclass(frozen=True)
class Pipeline:
    kind: str = "full"
    metric: str = "gower"
    n: int = 60
    k: int = 3
    filter_var: str | None = None
    cut: int | None = None

    def __post_init__(self):
        if self.kind not in PIPELINE_KINDS:
            raise ConfigError(f"unknown pipeline {self.kind!r}; expected one of {PIPELINE_KINDS}")
        if self.metric not in METRICS:
            raise ConfigError(f"unknown metric {self.metric!r}")
        if self.kind == "filter" and not self.filter_var:
            raise ConfigError("filter pipeline needs a filter variable")
        if self.n < 1 or self.k < 1:
            raise ConfigError("n and k must be positive")

    @property
    def label(self) -> str:
        if self.kind == "analogues":
            return f"analogues-{self.metric}-{self.n}"
        if self.kind == "structure":
            return f"structure-{self.metric}-{self.n}-k{self.k}"
        if self.kind == "filter":
            return f"filter-{self.filter_var}" + (f"-cut{self.cut}" if self.cut else "")
        return "full"

    @classmethod
    def parse(cls, text: str) -> "Pipeline":
        """``full``, ``analogues:gower:60``, ``structure:gower:60:3`` or ``filter:<var>[:cut]``."""
        parts = text.split(":")
        kind = parts[0]
        try:
            if kind == "full" and len(parts) == 1:
                return cls("full")
            if kind == "analogues" and len(parts) == 3:
                return cls("analogues", parts[1], int(parts[2]))
            if kind == "structure" and len(parts) == 4:
                return cls("structure", parts[1], int(parts[2]), int(parts[3]))
            if kind == "filter" and len(parts) in (2, 3):
                return cls("filter", filter_var=parts[1], cut=int(parts[2]) if len(parts) == 3 else None)
        except ValueError:
            pass
        raise ConfigError(f"cannot parse pipeline {text!r}")

    def to_json(self) -> dict:
        return {"kind": self.kind, "metric": self.metric, "n": self.n, "k": self.k,
                "filter_var": self.filter_var, "cut": self.cut}


class FullPredictor:
    def __init__(self, train: Dataset, lc: LearnConfig):
        self.bn = learn_network(train, lc)

    def impute(self, record, target, n, seed):
        return impute(self.bn, record, target, n, seed)


class AnaloguePredictor:
    """Learns a network on the ``n`` nearest training rows of each query."""

    def __init__(self, train: Dataset, lc: LearnConfig, metric: str, n: int):
        self.train = prepare_training(train, lc.complete_case)
        self.lc = lc
        self.n = min(n, self.train.n_rows)
        self.cfg = MetricConfig.from_dataset(self.train, metric)
        self._cache: dict[tuple, object] = {}

    def analogues(self, record) -> np.ndarray:
        idx, _ = nearest_analogues(self.train, record, self.cfg, self.n)
        return idx

    def network(self, record):
        idx = self.analogues(record)
        key = tuple(sorted(idx.tolist()))
        bn = self._cache.get(key)
        if bn is None:
            bn = self._cache[key] = learn_network(self.train.subset(np.sort(idx)), self.lc)
        return bn

    def impute(self, record, target, n, seed):
        return impute(self.network(record), record, target, n, seed)


class StructurePredictor:
    def __init__(self, train, lc, metric, n, k, jobs=1):
        from resbn.cluster import build_structure_clusters

        self.model = build_structure_clusters(train, n, metric, k, lc, jobs=jobs)

    def impute(self, record, target, n, seed):
        return self.model.impute(record, target, n, seed)


class FilterPredictor:
    def __init__(self, train, lc, var, cut, seed=0):
        from resbn.cluster import build_filter_clusters

        selection = "fixed" if cut else "holdout"
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            self.model = build_filter_clusters(train, var, lc, selection, cut, seed=seed)

    def impute(self, record, target, n, seed):
        from resbn.cluster import filter_route_impute

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return filter_route_impute(self.model, record, target, n, seed)


def build_predictor(pipeline: Pipeline, train: Dataset, lc: LearnConfig, seed: int = 0, jobs: int = 1):
    if pipeline.kind == "full":
        return FullPredictor(train, lc)
    if pipeline.kind == "analogues":
        return AnaloguePredictor(train, lc, pipeline.metric, pipeline.n)
    if pipeline.kind == "structure":
        return StructurePredictor(train, lc, pipeline.metric, pipeline.n, pipeline.k, jobs)
    return FilterPredictor(train, lc, pipeline.filter_var, pipeline.cut, seed)


# -- leave-one-out -------------------------------------------------------------

@dataclass
class EvalReport:
    """Per-variable scores of one pipeline run.

    ``variables`` maps a name to ``{"metric", "value", "n"}`` (plus ``mae``
    and ``r2`` for continuous variables).  ``elapsed`` is wall-clock seconds
    and is left out of :meth:`to_json` so reports are reproducible.
    """

    pipeline: str
    fingerprint: str
    variables: dict[str, dict]
    n_folds: int
    failures: list[dict] = field(default_factory=list)
    elapsed: float = 0.0
    predictions: dict[str, list] = field(default_factory=dict, repr=False)

    @property
    def mean_nrmse(self) -> float:
        vals = [v["value"] for v in self.variables.values() if v["metric"] == "nrmse"]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def mean_accuracy(self) -> float:
        vals = [v["value"] for v in self.variables.values() if v["metric"] == "accuracy"]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def failed_folds(self) -> int:
        return len({f["row"] for f in self.failures if f.get("variable") is None})

    def to_json(self) -> dict:
        return {
            "pipeline": self.pipeline,
            "fingerprint": self.fingerprint,
            "n_folds": self.n_folds,
            "mean_nrmse": _clean(self.mean_nrmse),
            "mean_accuracy": _clean(self.mean_accuracy),
            "variables": {k: {kk: _clean(vv) for kk, vv in v.items()} for k, v in sorted(self.variables.items())},
            "failures": self.failures,
        }

    def rows(self) -> list[dict]:
        out = [{"variable": k, "metric": v["metric"], "value": v["value"], "n": v["n"]}
               for k, v in self.variables.items()]
        out.append({"variable": "MEAN", "metric": "nrmse", "value": self.mean_nrmse, "n": ""})
        out.append({"variable": "MEAN", "metric": "accuracy", "value": self.mean_accuracy, "n": ""})
        return out


def _clean(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


def _fold(data: Dataset, i: int, pipeline: Pipeline, lc: LearnConfig, variables, n: int, seed: int):
    rows = [r for r in range(data.n_rows) if r != i]
    out, fails = [], []
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            pred = build_predictor(pipeline, data.subset(rows), lc, fold_seed(seed, i))
    except ResbnError as e:
        return out, [{"row": i, "variable": None, "error": f"{type(e).__name__}: {e}"}]
    rec = data.record(i)
    for j, var in enumerate(variables):
        if var not in rec:
            continue
        ev = {k: v for k, v in rec.items() if k != var}
        try:
            value, _ = pred.impute(ev, var, n, fold_seed(seed, i, j))
        except ResbnError as e:
            fails.append({"row": i, "variable": var, "error": f"{type(e).__name__}: {e}"})
            continue
        out.append((var, value, rec[var]))
    return out, fails


def loo_evaluate(data: Dataset, pipeline: Pipeline | str = "full", learn_cfg: LearnConfig | None = None,
                 n: int = 500, seed: int = 0, jobs: int = 1, rows: Sequence[int] | None = None,
                 variables: Sequence[str] | None = None) -> EvalReport:
    """Leave-one-out scores of ``pipeline`` on the complete rows of ``data``.

    ``rows`` restricts which rows are held out (all by default); training
    always uses every other row.  Failed folds are listed in the report.
    """
    t0 = time.perf_counter()
    if isinstance(pipeline, str):
        pipeline = Pipeline.parse(pipeline)
    lc = learn_cfg or LearnConfig()
    data = prepare_training(data, lc.complete_case)
    if data.n_rows < 3:
        raise ConfigError("leave-one-out needs at least three rows")
    variables = list(variables or data.names)
    unknown = [v for v in variables if v not in data.names]
    if unknown:
        raise ConfigError(f"unknown variables {unknown}")
    for v in variables:
        if not data.spec(v).is_categorical and not data.stats[v].range > 0:
            raise DegenerateRangeError(f"variable {v!r} has zero range")
    folds = list(range(data.n_rows)) if rows is None else [int(r) for r in rows]
    if jobs == 1:
        results = [_fold(data, i, pipeline, lc, variables, n, seed) for i in folds]
    else:
        results = Parallel(n_jobs=jobs)(delayed(_fold)(data, i, pipeline, lc, variables, n, seed)
                                        for i in folds)
    preds: dict[str, list] = {v: [] for v in variables}
    failures = []
    for out, fails in results:
        failures.extend(fails)
        for var, p, t in out:
            preds[var].append((p, t))
    report_vars = {}
    for var in variables:
        pairs = preds[var]
        if not pairs:
            continue
        p, t = zip(*pairs)
        if data.spec(var).is_categorical:
            report_vars[var] = {"metric": "accuracy", "value": accuracy(p, t), "n": len(p)}
        else:
            report_vars[var] = {"metric": "nrmse", "value": nrmse(p, t, data.stats[var].range),
                                "n": len(p), "mae": float(np.mean(np.abs(np.subtract(p, t)))),
                                "r2": r_squared(p, t)}
    fp = fingerprint({"pipeline": pipeline.to_json(), "learn": lc.to_json(), "n": n, "seed": seed,
                      "rows": folds, "variables": variables, "data_rows": data.n_rows})
    return EvalReport(pipeline.label, fp, report_vars, len(folds), failures,
                      time.perf_counter() - t0, preds)


def grid_experiment(data: Dataset, scores: Sequence[str] = GRID_SCORES, discs: Sequence[str] = GRID_DISCS,
                    learn_cfg: LearnConfig | None = None, n: int = 500, seed: int = 0, jobs: int = 1,
                    rows: Sequence[int] | None = None) -> list[dict]:
    """Full-data LOO for every (score, discretization) cell.  A failing cell is
    recorded with its error and the grid continues."""
    if not scores or not discs:
        raise ConfigError("grid needs at least one score and one discretization")
    lc0 = learn_cfg or LearnConfig()
    base = lc0.to_json()
    cells = []
    for disc in discs:
        for score in scores:
            cell = {"score": score, "disc": disc}
            try:
                lc = LearnConfig.from_json({**base, "score": score, "disc": disc,
                                         "max_parents": lc0.max_parents})
                cell["report"] = loo_evaluate(data, Pipeline("full"), lc, n, seed, jobs, rows)
            except ResbnError as e:
                cell["error"] = f"{type(e).__name__}: {e}"
            cells.append(cell)
    return cells


# -- recovery-factor case study ------------------------------------------------

def watt_evidence() -> dict:
    """Evidence row of the synthetic Watt reservoir used in the case study."""
    text = resources.files("resbn").joinpath("resources/watt.json").read_text()
    return json.loads(text)


DEFAULT_CASE_PIPELINES = (
    Pipeline("full"),
    Pipeline("analogues", "cosine", 60),
    Pipeline("analogues", "gower", 60),
    Pipeline("analogues", "hamming", 60),
    Pipeline("structure", "gower", 60, 3),
    Pipeline("filter", filter_var="Tectonic regime"),
)


@dataclass
class CaseResult:
    pipeline: str
    mean: float | None
    p025: float | None
    p975: float | None
    samples: np.ndarray | None
    error: str | None = None

    def to_json(self) -> dict:
        return {"pipeline": self.pipeline, "mean": self.mean, "p025": self.p025, "p975": self.p975,
                "error": self.error}


def rf_case_study(data: Dataset, evidence: Mapping | None = None,
                  pipelines: Sequence[Pipeline] = DEFAULT_CASE_PIPELINES,
                  learn_cfg: LearnConfig | None = None, n: int = 500, seed: int = 0,
                  target: str = OIL_RF, jobs: int = 1) -> list[CaseResult]:
    """Impute ``target`` for one evidence row under each pipeline."""
    lc = learn_cfg or LearnConfig()
    evidence = dict(watt_evidence() if evidence is None else evidence)
    evidence.pop(target, None)
    out = []
    for k, p in enumerate(pipelines):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                pred = build_predictor(p, data, lc, seed, jobs)
                _, s = pred.impute(evidence, target, n, fold_seed(seed, k))
            out.append(CaseResult(p.label, s.mean, s.p025, s.p975, s.samples))
        except ResbnError as e:
            out.append(CaseResult(p.label, None, None, None, None, f"{type(e).__name__}: {e}"))
    return out
