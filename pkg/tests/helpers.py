"""Small dataset builders shared by the tests."""
import numpy as np
import pandas as pd

from resbn.data import CATEGORICAL, CONTINUOUS, Dataset, VariableSpec


def make_dataset(columns: dict, kinds: dict | None = None) -> Dataset:
    """Dataset from column lists; string columns become categorical."""
    kinds = kinds or {}
    schema = []
    for name, col in columns.items():
        kind = kinds.get(name)
        if kind is None:
            kind = CATEGORICAL if any(isinstance(v, str) for v in col) else CONTINUOUS
        schema.append(VariableSpec(name, kind))
    return Dataset(tuple(schema), pd.DataFrame(columns))


def chain_data(n, seed=0, strength=0.9):
    """Binary chain A -> B -> C with copy probability ``strength``."""
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2, n)
    b = np.where(rng.random(n) < strength, a, 1 - a)
    c = np.where(rng.random(n) < strength, b, 1 - b)
    lab = np.array(["x", "y"])
    return make_dataset({"A": list(lab[a]), "B": list(lab[b]), "C": list(lab[c])})


def two_regime_data(n_per=100, seed=0, shift=3.0):
    """Two generating networks over the same columns, plus the true regime of each row.

    In regime 0 each continuous ``y{i}`` has a mean set by its categorical
    ``K{i}`` (edges K_i -> y_i, whose direction is forced because a discrete
    node cannot have a continuous parent); in regime 1 every column is
    independent.  Marker columns M1, M2, x and w only shift between regimes
    so Gower distance keeps them apart.
    """
    rng = np.random.default_rng(seed)
    labs = np.array(["p", "q", "r"])
    n = n_per
    cols = {}
    for i in (1, 2, 3):
        k0, k1 = rng.integers(0, 3, n), rng.integers(0, 3, n)
        cols[f"K{i}"] = list(labs[np.concatenate([k0, k1])])
        y0 = shift * k0 + rng.normal(0, 0.5, n)
        y1 = rng.normal(shift, shift * 0.8, n)
        cols[f"y{i}"] = np.concatenate([y0, y1])
    for m in ("M1", "M2"):
        cols[m] = ["m0"] * n + ["m1"] * n
    cols["x"] = np.concatenate([rng.normal(0, 0.5, n), rng.normal(10, 0.5, n)])
    cols["w"] = np.concatenate([rng.normal(5, 0.5, n), rng.normal(-5, 0.5, n)])
    return make_dataset(cols), np.repeat([0, 1], n)
