"""JSON persistence for fitted networks and cluster models.

Files are written with sorted keys and Python's shortest round-trip float
repr, so save, load and save again yields identical bytes.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Mapping

import numpy as np

from resbn.data import VariableSpec, from_records
from resbn.discretize import Discretizer
from resbn.errors import ModelFormatError
from resbn.graph import Dag
from resbn.learn import BayesNet, fingerprint

FORMAT = "resbn-model"
VERSION = 1
KINDS = ("bayesnet", "structure_clusters", "filter_clusters")


def _bn(obj: Mapping) -> BayesNet:
    return BayesNet.from_json(obj)


def _records(data) -> list[dict]:
    out = []
    for row in data.frame.itertuples(index=False):
        rec = {}
        for name, v in zip(data.names, row):
            if isinstance(v, float) and math.isnan(v):
                v = None
            rec[name] = v
        out.append(rec)
    return out


def _structure_json(m) -> dict:
    return {
        "schema": [s.to_json() for s in m.train.schema],
        "train": _records(m.train),
        "dags": [d.to_json() for d in m.dags],
        "hamming": m.hamming.tolist(),
        "linkage": m.linkage.tolist(),
        "k": m.k,
        "labels": [int(x) for x in m.labels],
        "networks": {str(c): bn.to_json() for c, bn in m.networks.items()},
        "metric": m.metric,
        "analogue_n": m.analogue_n,
        "k_assign": m.k_assign,
        "meta": m.meta,
    }


def _structure_from(obj: Mapping):
    from resbn.cluster import StructureClusterModel

    schema = [VariableSpec.from_json(s) for s in obj["schema"]]
    train = from_records(obj["train"], schema)
    names = [s.name for s in schema]
    dags = [Dag(tuple(names), Dag.from_json(d).edges) for d in obj["dags"]]
    return StructureClusterModel(
        train, dags, np.asarray(obj["hamming"], dtype=float),
        np.asarray(obj["linkage"], dtype=float).reshape(-1, 4), int(obj["k"]),
        np.asarray(obj["labels"], dtype=int), {int(c): _bn(v) for c, v in obj["networks"].items()},
        obj["metric"], int(obj["analogue_n"]), int(obj["k_assign"]), dict(obj["meta"]))


def _filter_json(m) -> dict:
    return {
        "filter_var": m.filter_var,
        "groups": m.groups,
        "group_dags": {g: d.to_json() for g, d in m.group_dags.items()},
        "group_sizes": m.group_sizes,
        "hamming": m.hamming.tolist(),
        "linkage": m.linkage.tolist(),
        "cut": m.cut,
        "clusters": {str(c): gs for c, gs in m.clusters.items()},
        "networks": {str(c): bn.to_json() for c, bn in m.networks.items()},
        "full": m.full.to_json(),
        "binning": m.binning.to_json() if m.binning is not None else None,
        "cut_scores": {str(k): v for k, v in m.cut_scores.items()},
        "meta": m.meta,
    }


def _filter_from(obj: Mapping):
    from resbn.cluster import FilterClusterModel

    return FilterClusterModel(
        obj["filter_var"], {g: list(v) for g, v in obj["groups"].items()},
        {g: Dag.from_json(d) for g, d in obj["group_dags"].items()},
        {g: int(n) for g, n in obj["group_sizes"].items()},
        np.asarray(obj["hamming"], dtype=float), np.asarray(obj["linkage"], dtype=float).reshape(-1, 4),
        int(obj["cut"]), {int(c): list(gs) for c, gs in obj["clusters"].items()},
        {int(c): _bn(v) for c, v in obj["networks"].items()}, _bn(obj["full"]),
        Discretizer.from_json(obj["binning"]) if obj["binning"] is not None else None,
        {int(k): float(v) for k, v in obj["cut_scores"].items()}, dict(obj["meta"]))


def model_kind(model) -> str:
    from resbn.cluster import FilterClusterModel, StructureClusterModel

    if isinstance(model, BayesNet):
        return "bayesnet"
    if isinstance(model, StructureClusterModel):
        return "structure_clusters"
    if isinstance(model, FilterClusterModel):
        return "filter_clusters"
    raise TypeError(f"cannot serialise {type(model).__name__}")


def dumps(model) -> str:
    kind = model_kind(model)
    body = {"bayesnet": lambda m: m.to_json(), "structure_clusters": _structure_json,
            "filter_clusters": _filter_json}[kind](model)
    doc = {"format": FORMAT, "version": VERSION, "kind": kind, "model": body,
           "fingerprint": fingerprint(body)}
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def loads(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"model file is not valid JSON (truncated?): {e}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFormatError("field 'format': not a resbn model file")
    if doc.get("version") != VERSION:
        raise ModelFormatError(f"field 'version': expected {VERSION}, found {doc.get('version')!r}")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ModelFormatError(f"field 'kind': unknown model kind {kind!r}")
    if "model" not in doc:
        raise ModelFormatError("field 'model' is missing")
    if doc.get("fingerprint") != fingerprint(doc["model"]):
        raise ModelFormatError("field 'fingerprint' does not match the model body")
    try:
        return {"bayesnet": _bn, "structure_clusters": _structure_from,
                "filter_clusters": _filter_from}[kind](doc["model"])
    except KeyError as e:
        raise ModelFormatError(f"field {e.args[0]!r} is missing from the {kind} model") from None
    except (TypeError, ValueError) as e:
        raise ModelFormatError(f"malformed {kind} model: {e}") from None


def save_model(model, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = dumps(model)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)
    return path


def load_model(path):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ModelFormatError(f"cannot read model file {path}: {e}") from None
    return loads(text)
