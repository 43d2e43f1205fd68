"""Run configuration: a flat TOML file whose keys mirror command-line flags.

Example::

    data = "reservoirs.csv"
    log_vars = ["Permeability", "Gross", "Netpay"]
    period_mode = "label"
    score = "k2"
    disc = "kmeans5"
    metric = "gower"
    analogue_n = 60
    seed = 0
    out = "out"

    [name_map]
    "Oil recovery factor" = "RF"
"""
from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from resbn.data import OIL_RF, PERIOD, Dataset, apply_log, load_reservoirs, period_to_age
from resbn.discretize import parse_label
from resbn.errors import ConfigError
from resbn.graph import EdgeConstraints
from resbn.learn import LearnConfig, fingerprint
from resbn.score import SCORE_KINDS
from resbn.similarity import METRICS

PERIOD_MODES = ("label", "age", "log_age")
SELECTIONS = ("holdout", "fixed")


@dataclass
class RunConfig:
    data: str | None = None
    name_map: dict = field(default_factory=dict)
    derive_ntg: bool = True
    log_vars: list = field(default_factory=list)
    period_mode: str = "label"
    score: str = "k2"
    disc: str = "kmeans5"
    max_parents: int | None = None
    required_edges: list = field(default_factory=list)
    forbidden_edges: list = field(default_factory=list)
    alpha: float = 1.0
    metric: str = "gower"
    analogue_n: int = 60
    cluster_k: int = 3
    linkage: str = "average"
    min_cluster_size: int = 10
    filter_var: str | None = None
    filter_cut: int | None = None
    selection: str = "holdout"
    pipeline: str = "full"
    target: str = OIL_RF
    n_samples: int = 500
    seed: int = 0
    jobs: int = 1
    eval_stride: int = 1
    grid_scores: list = field(default_factory=lambda: list(SCORE_KINDS))
    grid_discs: list = field(default_factory=lambda: ["5k", "10k", "5q", "10q", "5u", "10u"])
    out: str = "out"

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_mapping(cls, obj: Mapping[str, Any]) -> "RunConfig":
        unknown = sorted(set(obj) - set(cls.field_names()))
        if unknown:
            raise ConfigError("unknown configuration keys",
                              [{"field": k, "message": "unknown key"} for k in unknown])
        cfg = cls(**dict(obj))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, overrides: Mapping[str, Any] | None = None) -> "RunConfig":
        obj: dict = {}
        if path is not None:
            try:
                with open(path, "rb") as fh:
                    obj = tomllib.load(fh)
            except OSError as e:
                raise ConfigError(f"cannot read config file: {e}",
                                  [{"field": "config", "message": str(e)}]) from None
            except tomllib.TOMLDecodeError as e:
                raise ConfigError(f"invalid TOML: {e}", [{"field": "config", "message": str(e)}]) from None
        obj.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_mapping(obj)

    def validate(self) -> None:
        errs = []

        def bad(name, msg):
            errs.append({"field": name, "message": msg})

        types = {"derive_ntg": bool, "period_mode": str, "score": str, "disc": str, "metric": str,
                 "linkage": str, "selection": str, "pipeline": str, "target": str, "out": str,
                 "name_map": dict, "log_vars": list, "required_edges": list, "forbidden_edges": list,
                 "grid_scores": list, "grid_discs": list}
        for name, t in types.items():
            if not isinstance(getattr(self, name), t):
                bad(name, f"expected {t.__name__}")
        ints = ("analogue_n", "cluster_k", "min_cluster_size", "n_samples", "seed", "jobs", "eval_stride")
        for name in ints:
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                bad(name, "expected an integer")
            elif name != "seed" and v < 1:
                bad(name, "must be positive")
            elif name == "seed" and v < 0:
                bad(name, "must be nonnegative")
        for name in ("max_parents", "filter_cut"):
            v = getattr(self, name)
            if v is not None and (isinstance(v, bool) or not isinstance(v, int) or v < 1):
                bad(name, "expected a positive integer")
        if isinstance(self.alpha, bool) or not isinstance(self.alpha, (int, float)) or self.alpha < 0:
            bad("alpha", "expected a nonnegative number")
        if self.data is not None and not isinstance(self.data, str):
            bad("data", "expected a path string")
        if self.filter_var is not None and not isinstance(self.filter_var, str):
            bad("filter_var", "expected a variable name")
        if errs:
            raise ConfigError("invalid configuration", errs)
        if self.period_mode not in PERIOD_MODES:
            bad("period_mode", f"expected one of {PERIOD_MODES}")
        if self.score not in SCORE_KINDS:
            bad("score", f"expected one of {SCORE_KINDS}")
        for name, labels in (("disc", [self.disc]), ("grid_discs", self.grid_discs)):
            for lab in labels:
                try:
                    parse_label(str(lab))
                except ConfigError as e:
                    bad(name, str(e))
        for s in self.grid_scores:
            if s not in SCORE_KINDS:
                bad("grid_scores", f"unknown score {s!r}")
        if self.metric not in METRICS:
            bad("metric", f"expected one of {METRICS}")
        if self.linkage not in ("average", "complete", "single"):
            bad("linkage", "expected average, complete or single")
        if self.selection not in SELECTIONS:
            bad("selection", f"expected one of {SELECTIONS}")
        for name in ("required_edges", "forbidden_edges"):
            for e in getattr(self, name):
                if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, str) for x in e)):
                    bad(name, f"edge {e!r} is not a [parent, child] pair")
        if not errs:
            try:
                self.learn_config()
            except ConfigError as e:
                bad("required_edges", str(e))
            from resbn.evaluation import Pipeline
            try:
                Pipeline.parse(self.pipeline)
            except ConfigError as e:
                bad("pipeline", str(e))
        if errs:
            raise ConfigError("invalid configuration", errs)

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    def fingerprint(self) -> str:
        # output location and worker count do not change results
        body = {k: v for k, v in self.to_json().items() if k not in ("out", "jobs")}
        return fingerprint(body)

    def learn_config(self) -> LearnConfig:
        constraints = EdgeConstraints(frozenset(tuple(e) for e in self.required_edges),
                                      frozenset(tuple(e) for e in self.forbidden_edges))
        return LearnConfig(self.score, self.disc, self.max_parents, constraints, float(self.alpha))

    def load_data(self) -> Dataset:
        """Read the table and apply the configured transforms."""
        data = load_reservoirs(self.data, name_map=self.name_map, derive_ntg=self.derive_ntg)
        if self.period_mode != "label":
            data = period_to_age(data, log=self.period_mode == "log_age", var=PERIOD)
        for var in self.log_vars:
            if var not in data.names:
                raise ConfigError(f"log variable {var!r} is not in the schema",
                                  [{"field": "log_vars", "message": f"unknown variable {var!r}"}])
            data = apply_log(data, var)
        if self.filter_var is not None and self.filter_var not in data.names:
            raise ConfigError(f"filter_var {self.filter_var!r} is not in the schema",
                              [{"field": "filter_var", "message": "unknown variable"}])
        if self.target not in data.names:
            raise ConfigError(f"target {self.target!r} is not in the schema",
                              [{"field": "target", "message": "unknown variable"}])
        for e in self.required_edges + self.forbidden_edges:
            for node in e:
                if node not in data.names:
                    raise ConfigError(f"edge endpoint {node!r} is not in the schema",
                                      [{"field": "required_edges", "message": f"unknown variable {node!r}"}])
        return data

