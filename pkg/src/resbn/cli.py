"""``resbn`` command line.

Every subcommand reads an optional TOML run config (``--config``); flags
override config keys.  Artifacts go under ``<out>/models``, ``<out>/reports``
and ``<out>/samples``.  Exit status is 0 on success, 2 for an invalid
configuration and 3 for data or model errors; failures print a JSON error
object on stderr.
"""
from __future__ import annotations

import csv
import functools
import json
import re
import sys
import time
import warnings
from pathlib import Path

import click
import numpy as np

from resbn.config import RunConfig
from resbn.data import transform_record
from resbn.errors import ConfigError, ResbnError

EXIT_CONFIG = 2
EXIT_DATA = 3


# -- plumbing ------------------------------------------------------------------

def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_").lower()


class Artifacts:
    """Writes files under the output directory and remembers what it wrote."""

    def __init__(self, cfg: RunConfig, command: str):
        self.root = Path(cfg.out)
        self.command = command
        self.fingerprint = cfg.fingerprint()
        self.written: list[str] = []

    def path(self, kind: str, name: str) -> Path:
        p = self.root / kind / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.written.append(str(Path(kind) / name))
        return p

    def json(self, kind: str, name: str, obj) -> Path:
        p = self.path(kind, name)
        p.write_text(json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n")
        return p

    def csv(self, kind: str, name: str, header: list[str], rows) -> Path:
        p = self.path(kind, name)
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow(["" if v is None else v for v in r])
        return p

    def model(self, name: str, model) -> Path:
        from resbn.io import save_model

        p = self.path("models", name)
        save_model(model, p)
        return p

    def finish(self, extra: dict | None = None) -> None:
        manifest = {"command": self.command, "fingerprint": self.fingerprint,
                    "artifacts": sorted(self.written)}
        manifest.update(extra or {})
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / f"manifest_{_slug(self.command)}.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=1) + "\n")


def _fail(code: int, err: Exception) -> None:
    obj = {"status": "error", "exit_code": code, "error": type(err).__name__, "message": str(err)}
    if isinstance(err, ConfigError) and err.fields:
        obj["fields"] = err.fields
    click.echo(json.dumps(obj, sort_keys=True), err=True)
    sys.exit(code)


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as e:
            _fail(EXIT_CONFIG, e)
        except (ResbnError, OSError) as e:
            _fail(EXIT_DATA, e)
    return wrapper


def common_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                     help="TOML run configuration."),
        click.option("--data", default=None, help="Input CSV (bundled table when omitted)."),
        click.option("--out", default=None, help="Output directory."),
        click.option("--score", default=None, help="k2, bic, mi, bic_mixed or mi_mixed."),
        click.option("--disc", default=None, help="Discretization label, e.g. kmeans5 or 10q."),
        click.option("--max-parents", type=int, default=None),
        click.option("--log-var", "log_vars", multiple=True, help="Variable to log-transform (repeatable)."),
        click.option("--period-mode", default=None, help="label, age or log_age."),
        click.option("--seed", type=int, default=None),
        click.option("--n-samples", type=int, default=None),
        click.option("--jobs", type=int, default=None),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _config(config_path, **flags) -> RunConfig:
    flags = {k: v for k, v in flags.items() if v is not None}
    if "log_vars" in flags:
        flags["log_vars"] = list(flags["log_vars"]) or None
        if flags["log_vars"] is None:
            del flags["log_vars"]
    return RunConfig.load(config_path, flags)


def _parse_json_arg(text: str, what: str) -> dict:
    if text.startswith("@"):
        try:
            text = Path(text[1:]).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read {what}: {e}", [{"field": what, "message": str(e)}]) from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{what} is not valid JSON: {e}", [{"field": what, "message": str(e)}]) from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{what} must be a JSON object", [{"field": what, "message": "not an object"}])
    return obj


def _dendrogram_rows(z):
    from resbn.cluster import merge_steps

    return merge_steps(np.asarray(z))


# -- commands ------------------------------------------------------------------

@click.group()
@click.version_option(package_name="artifact")
def main():
    """Bayesian-network tools for reservoir parameter imputation."""


@main.command()
@common_options
@guarded
def preprocess(config_path, **flags):
    """Load the table, apply transforms and write it with column statistics."""
    cfg = _config(config_path, **flags)
    data = cfg.load_data()
    art = Artifacts(cfg, "preprocess")
    rows = []
    for row in data.frame.itertuples(index=False):
        rows.append([None if (isinstance(v, float) and np.isnan(v)) else v for v in row])
    art.csv("reports", "preprocessed.csv", data.names, rows)
    stats = {k: {"min": v.min, "max": v.max, "mean": v.mean, "count": v.count}
             for k, v in data.stats.items()}
    art.json("reports", "preprocess.json", {
        "fingerprint": art.fingerprint, "n_rows": data.n_rows,
        "complete_rows": data.complete_cases().n_rows,
        "schema": [s.to_json() for s in data.schema], "stats": _finite(stats)})
    art.finish()
    click.echo(json.dumps({"rows": data.n_rows, "complete_rows": data.complete_cases().n_rows}))


def _finite(obj):
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


@main.command()
@common_options
@click.option("--name", default="bn", help="Model file stem under models/.")
@guarded
def learn(config_path, name, **flags):
    """Learn structure and parameters on the complete rows; save the model."""
    from resbn.learn import learn_network
    from resbn.score import total_score

    cfg = _config(config_path, **flags)
    data = cfg.load_data()
    lc = cfg.learn_config()
    bn = learn_network(data, lc)
    art = Artifacts(cfg, "learn")
    art.model(f"{name}.json", bn)
    art.csv("reports", f"{name}_edges.csv", ["parent", "child"], sorted(bn.dag.edges))
    train = data.complete_cases()
    art.json("reports", f"{name}_learn.json", {
        "fingerprint": art.fingerprint, "n_rows": bn.n_rows, "n_edges": len(bn.dag.edges),
        "score": lc.score, "disc": lc.disc,
        "total_score": total_score(bn.dag, train, lc.score, lc.disc)})
    art.finish()
    click.echo(json.dumps({"model": str(art.root / "models" / f"{name}.json"), "edges": len(bn.dag.edges)}))


@main.command()
@common_options
@click.option("--model", "model_path", default=None, help="Saved model; learned from the data when omitted.")
@click.option("--record", "--row", "record", required=True, help="Evidence as a JSON object or @file.")
@click.option("--target", default=None)
@click.option("--n", "n_draws", type=int, default=None, help="Number of samples (same as --n-samples).")
@guarded
def impute(config_path, model_path, record, target, n_draws, **flags):
    """Impute one variable of a record by sampling."""
    from resbn.cluster import FilterClusterModel, filter_route_impute
    from resbn.infer import impute as bn_impute
    from resbn.io import load_model
    from resbn.learn import BayesNet, learn_network

    if n_draws is not None:
        flags["n_samples"] = n_draws
    cfg = _config(config_path, target=target, **flags)
    rec = _parse_json_arg(record, "record")
    model = load_model(model_path) if model_path else learn_network(cfg.load_data(), cfg.learn_config())
    if isinstance(model, BayesNet):
        rec = transform_record(rec, model.schema)
        rec.pop(cfg.target, None)
        _, s = bn_impute(model, rec, cfg.target, cfg.n_samples, cfg.seed)
    elif isinstance(model, FilterClusterModel):
        rec = transform_record(rec, model.full.schema)
        rec.pop(cfg.target, None)
        _, s = filter_route_impute(model, rec, cfg.target, cfg.n_samples, cfg.seed)
    else:
        rec = transform_record(rec, model.train.schema)
        rec.pop(cfg.target, None)
        _, s = model.impute(rec, cfg.target, cfg.n_samples, cfg.seed)
    art = Artifacts(cfg, "impute")
    summary = s.to_json()
    summary["fingerprint"] = art.fingerprint
    art.json("reports", f"impute_{_slug(cfg.target)}.json", summary)
    art.csv("samples", f"impute_{_slug(cfg.target)}.csv", ["sample", "value"], enumerate(s.samples.tolist()))
    art.finish()
    click.echo(json.dumps(s.to_json(), sort_keys=True))


@main.command()
@common_options
@click.option("--metric", default=None, help="gower, hamming or cosine.")
@click.option("--n", "analogue_n", type=int, default=None, help="Number of analogues.")
@click.option("--row", required=True, help="Target record as JSON (or @file), or a row index.")
@guarded
def analogues(config_path, metric, analogue_n, row, **flags):
    """Rank the nearest analogue rows of a record."""
    from resbn.similarity import MetricConfig, nearest_analogues

    cfg = _config(config_path, metric=metric, analogue_n=analogue_n, **flags)
    data = cfg.load_data()
    target = int(row) if row.strip().lstrip("-").isdigit() else transform_record(
        _parse_json_arg(row, "row"), data.schema)
    if isinstance(target, int) and not 0 <= target < data.n_rows:
        raise ConfigError(f"row index {target} out of range", [{"field": "row", "message": "out of range"}])
    mcfg = MetricConfig.from_dataset(data, cfg.metric)
    idx, dist = nearest_analogues(data, target, mcfg, cfg.analogue_n)
    art = Artifacts(cfg, "analogues")
    rows = [(r + 1, int(i), float(d)) for r, (i, d) in enumerate(zip(idx, dist))]
    art.csv("reports", f"analogues_{cfg.metric}_{cfg.analogue_n}.csv", ["rank", "index", "distance"], rows)
    art.finish()
    for r in rows:
        click.echo(f"{r[0]},{r[1]},{r[2]!r}")


@main.command()
@common_options
@click.option("--metric", default=None)
@click.option("--n", "analogue_n", type=int, default=None)
@click.option("--k", "cluster_k", type=int, default=None)
@click.option("--linkage", default=None)
@guarded
def cluster(config_path, metric, analogue_n, cluster_k, linkage, **flags):
    """Cluster rows by the structure of their analogue networks."""
    from resbn.cluster import build_structure_clusters

    cfg = _config(config_path, metric=metric, analogue_n=analogue_n, cluster_k=cluster_k,
                  linkage=linkage, **flags)
    data = cfg.load_data()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        model = build_structure_clusters(data, cfg.analogue_n, cfg.metric, cfg.cluster_k, cfg.learn_config(),
                                         cfg.min_cluster_size, cfg.linkage, jobs=cfg.jobs)
    art = Artifacts(cfg, "cluster")
    art.model("structure_clusters.json", model)
    for c, bn in sorted(model.networks.items()):
        art.model(f"structure_cluster_{c}.json", bn)
    art.csv("reports", "structure_labels.csv", ["row", "cluster"], enumerate(model.labels.tolist()))
    art.csv("reports", "structure_dendrogram.csv", ["step", "cluster_a", "cluster_b", "height"],
            _dendrogram_rows(model.linkage))
    n = len(model.labels)
    art.csv("reports", "structure_hamming.csv", ["row"] + [str(j) for j in range(n)],
            ([i] + [int(x) for x in model.hamming[i]] for i in range(n)))
    notes = sorted({str(w.message) for w in caught if "minimum fit size" in str(w.message)})
    art.finish({"warnings": notes})
    sizes = {int(c): int((model.labels == c).sum()) for c in np.unique(model.labels)}
    click.echo(json.dumps({"clusters": sizes, "warnings": notes}))


@main.command("filter-cluster")
@common_options
@click.option("--filter-var", default=None)
@click.option("--cut", "filter_cut", type=int, default=None)
@click.option("--selection", default=None, help="holdout or fixed.")
@guarded
def filter_cluster(config_path, filter_var, filter_cut, selection, **flags):
    """Group the values of one variable by the structure of their networks."""
    from resbn.cluster import build_filter_clusters

    cfg = _config(config_path, filter_var=filter_var, filter_cut=filter_cut, selection=selection, **flags)
    if cfg.filter_var is None:
        raise ConfigError("filter-cluster needs a filter variable",
                          [{"field": "filter_var", "message": "required"}])
    data = cfg.load_data()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = build_filter_clusters(data, cfg.filter_var, cfg.learn_config(), cfg.selection, cfg.filter_cut,
                                      cfg.min_cluster_size, cfg.linkage, seed=cfg.seed)
    art = Artifacts(cfg, "filter-cluster")
    art.model("filter_clusters.json", model)
    for c, bn in sorted(model.networks.items()):
        art.model(f"filter_cluster_{c}.json", bn)
    art.csv("reports", "filter_dendrogram.csv", ["step", "cluster_a", "cluster_b", "height"],
            _dendrogram_rows(model.linkage))
    art.csv("reports", "filter_cuts.csv", ["cut", "mean_nrmse"], sorted(model.cut_scores.items()))
    rows = []
    for c, groups in sorted(model.clusters.items()):
        for g in groups:
            rows.append([c, g, "|".join(model.groups[g]), model.group_sizes[g]])
    art.csv("reports", "filter_clusters.csv", ["cluster", "group", "values", "rows"], rows)
    art.finish({"cut": model.cut})
    click.echo(json.dumps({"cut": model.cut, "clusters": {str(c): g for c, g in model.clusters.items()}}))


def _report_files(art: Artifacts, stem: str, report) -> None:
    body = report.to_json()
    body["config_fingerprint"] = art.fingerprint
    art.json("reports", f"{stem}.json", body)
    art.csv("reports", f"{stem}.csv", ["variable", "metric", "value", "n"],
            ([r["variable"], r["metric"], r["value"], r["n"]] for r in report.rows()))


def _timing(cfg: RunConfig, stem: str, seconds: float) -> None:
    # kept out of the reports and the manifest so those stay reproducible
    p = Path(cfg.out) / "timing" / f"{stem}.json"
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps({"seconds": seconds}) + "\n")


@main.command()
@common_options
@click.option("--pipeline", default=None,
              help="full, analogues:<metric>:<n>, structure:<metric>:<n>:<k> or filter:<var>[:<cut>].")
@click.option("--stride", "eval_stride", type=int, default=None, help="Hold out every stride-th row only.")
@guarded
def evaluate(config_path, pipeline, eval_stride, **flags):
    """Leave-one-out evaluation of one pipeline."""
    from resbn.evaluation import Pipeline, loo_evaluate

    cfg = _config(config_path, pipeline=pipeline, eval_stride=eval_stride, **flags)
    data = cfg.load_data()
    p = Pipeline.parse(cfg.pipeline)
    n_rows = data.complete_cases().n_rows
    rows = range(0, n_rows, cfg.eval_stride) if cfg.eval_stride > 1 else None
    report = loo_evaluate(data, p, cfg.learn_config(), cfg.n_samples, cfg.seed, cfg.jobs, rows)
    art = Artifacts(cfg, "evaluate")
    stem = f"eval_{_slug(p.label)}"
    _report_files(art, stem, report)
    art.finish()
    _timing(cfg, stem, report.elapsed)
    click.echo(json.dumps({"pipeline": p.label, "mean_nrmse": report.mean_nrmse,
                           "mean_accuracy": report.mean_accuracy, "failures": len(report.failures)}))


@main.command()
@common_options
@click.option("--stride", "eval_stride", type=int, default=None)
@guarded
def grid(config_path, eval_stride, **flags):
    """Leave-one-out over every score and discretization pair."""
    from resbn.evaluation import grid_experiment

    cfg = _config(config_path, eval_stride=eval_stride, **flags)
    data = cfg.load_data()
    n_rows = data.complete_cases().n_rows
    rows = range(0, n_rows, cfg.eval_stride) if cfg.eval_stride > 1 else None
    t0 = time.perf_counter()
    cells = grid_experiment(data, cfg.grid_scores, cfg.grid_discs, cfg.learn_config(), cfg.n_samples,
                            cfg.seed, cfg.jobs, rows)
    art = Artifacts(cfg, "grid")
    variables = data.names
    out_rows, body = [], []
    for c in cells:
        rep = c.get("report")
        per = [rep.variables.get(v, {}).get("value") if rep else None for v in variables]
        out_rows.append([c["disc"], c["score"], rep.mean_nrmse if rep else None,
                         rep.mean_accuracy if rep else None] + per + [c.get("error", "")])
        body.append({"disc": c["disc"], "score": c["score"], "error": c.get("error"),
                     "report": rep.to_json() if rep else None})
    art.csv("reports", "grid.csv", ["disc", "score", "mean_nrmse", "mean_accuracy"] + variables + ["error"],
            out_rows)
    art.json("reports", "grid.json", {"fingerprint": art.fingerprint, "cells": body})
    art.finish()
    _timing(cfg, "grid", time.perf_counter() - t0)
    click.echo(json.dumps({"cells": len(cells), "failed": sum("error" in c for c in cells)}))


@main.command("rf-case")
@common_options
@click.option("--evidence", default=None, help="Evidence JSON object or @file (Watt row by default).")
@click.option("--target", default=None)
@guarded
def rf_case(config_path, evidence, target, **flags):
    """Impute the target for one evidence row under the six pipelines."""
    from resbn.evaluation import rf_case_study, watt_evidence

    cfg = _config(config_path, target=target, **flags)
    data = cfg.load_data()
    ev = _parse_json_arg(evidence, "evidence") if evidence else watt_evidence()
    ev = transform_record(ev, data.schema)
    results = rf_case_study(data, ev, learn_cfg=cfg.learn_config(), n=cfg.n_samples, seed=cfg.seed,
                            target=cfg.target, jobs=cfg.jobs)
    art = Artifacts(cfg, "rf-case")
    art.csv("reports", "rf_case.csv", ["pipeline", "mean", "p025", "p975", "error"],
            ([r.pipeline, r.mean, r.p025, r.p975, r.error or ""] for r in results))
    art.json("reports", "rf_case.json", {"fingerprint": art.fingerprint, "target": cfg.target,
                                         "evidence": ev, "results": [r.to_json() for r in results]})
    samples = []
    for r in results:
        if r.samples is not None:
            samples.extend([r.pipeline, i, float(v)] for i, v in enumerate(r.samples))
    art.csv("samples", "rf_case_samples.csv", ["pipeline", "sample", "value"], samples)
    art.finish()
    for r in results:
        click.echo(json.dumps(r.to_json(), sort_keys=True))
    if all(r.error for r in results):
        raise_data = ResbnError("every pipeline failed")
        _fail(EXIT_DATA, raise_data)


if __name__ == "__main__":
    main()
