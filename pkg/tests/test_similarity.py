import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

import oracles
from helpers import make_dataset
from resbn.errors import ConfigError, IncomparableError
from resbn.similarity import (MetricConfig, cosine_distance, distance, distance_matrix, distances_to,
                              gower_distance, hamming_distance, nearest_analogues)

CATS = ["Lithology", "Setting"]
NUMS = ["Permeability", "Porosity"]


@pytest.fixture(scope="module")
def pair_cfg(reservoirs):
    return MetricConfig.from_dataset(reservoirs.select(["Lithology", "Permeability"]))


SAND_U = {"Lithology": "SANDSTONE", "Permeability": 221.0}
CONGL_T = {"Lithology": "CONGLOMERATE", "Permeability": 125.0}


def test_sample_pair_gower(pair_cfg, reservoirs):
    p_max = reservoirs.stats["Permeability"].max
    assert reservoirs.stats["Permeability"].min == 0.0
    assert gower_distance(SAND_U, CONGL_T, pair_cfg) == pytest.approx((1 + 96 / p_max) / 2, abs=1e-12)


def test_sample_pair_hamming(pair_cfg, reservoirs):
    p_max = reservoirs.stats["Permeability"].max
    assert hamming_distance(SAND_U, CONGL_T, pair_cfg) == pytest.approx(1 + 96 / p_max, abs=1e-12)


def test_sample_pair_cosine(pair_cfg, reservoirs):
    p_max = reservoirs.stats["Permeability"].max
    a = np.array([1.0, 221 / p_max])
    b = np.array([0.0, 125 / p_max])
    expected = 1 - a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
    assert cosine_distance(SAND_U, CONGL_T, pair_cfg) == pytest.approx(expected, abs=1e-12)


def toy_cfg(kind="gower", **kw):
    data = make_dataset({"Lithology": ["A", "B", "C"], "Setting": ["x", "y", "x"],
                         "Permeability": [0.0, 50.0, 100.0], "Porosity": [5.0, 10.0, 25.0]})
    return MetricConfig.from_dataset(data, kind, **kw)


def test_categorical_only_is_scaled_hamming():
    cfg = MetricConfig.from_dataset(make_dataset({c: list("ab") for c in "PQRS"}))
    u = dict(P="a", Q="a", R="a", S="a")
    t = dict(P="a", Q="b", R="a", S="b")
    assert hamming_distance(u, t, cfg) == 2
    assert gower_distance(u, t, cfg) == pytest.approx(2 / 4)
    assert hamming_distance(u, u, cfg) == 0


def test_cosine_identity_and_orthogonal():
    cfg = MetricConfig.from_dataset(make_dataset({"x": [0.0, 1.0], "y": [0.0, 1.0]}), "cosine")
    assert cosine_distance({"x": 0.3, "y": 0.8}, {"x": 0.3, "y": 0.8}, cfg) == pytest.approx(0.0, abs=1e-12)
    assert cosine_distance({"x": 1.0, "y": 0.0}, {"x": 0.0, "y": 1.0}, cfg) == pytest.approx(1.0)
    with pytest.raises(IncomparableError):
        cosine_distance({"x": 0.0, "y": 0.0}, {"x": 1.0, "y": 1.0}, cfg)


def test_no_comparable_variables():
    cfg = toy_cfg()
    with pytest.raises(IncomparableError):
        gower_distance({"Lithology": "A"}, {"Porosity": 3.0}, cfg)


def test_config_validation():
    with pytest.raises(ConfigError):
        toy_cfg("manhattan")
    with pytest.raises(ConfigError):
        toy_cfg(weights={v: 0.0 for v in CATS + NUMS})
    with pytest.raises(ConfigError):
        toy_cfg(weights={"Porosity": -1.0})


def test_ratio_scaled_variant():
    cfg = toy_cfg(gower_variant="ratio_scaled")
    u = {"Porosity": 5.0}
    t = {"Porosity": 10.0}
    assert gower_distance(u, t, cfg) == pytest.approx(5.0 / (1 - 5.0 / 25.0))
    assert gower_distance(u, t, toy_cfg()) == pytest.approx(5.0 / 20.0)


def cell(kind):
    if kind == "cat":
        return st.one_of(st.none(), st.sampled_from(["A", "B", "C"]))
    return st.one_of(st.none(), st.floats(0, 100))


records = st.fixed_dictionaries({"Lithology": cell("cat"), "Setting": st.one_of(st.none(), st.sampled_from("xy")),
                                 "Permeability": cell("num"), "Porosity": st.one_of(st.none(), st.floats(5, 25))})
complete_records = st.fixed_dictionaries({"Lithology": st.sampled_from("ABC"), "Setting": st.sampled_from("xy"),
                                          "Permeability": st.floats(0, 100), "Porosity": st.floats(5, 25)})

RANGES = {"Permeability": (0.0, 100.0), "Porosity": (5.0, 25.0)}


def comparable(u, t):
    return any(u[v] is not None and t[v] is not None for v in CATS + NUMS)


@settings(max_examples=200, deadline=None)
@given(records, records)
def test_matches_oracles(u, t):
    assume(comparable(u, t))
    cfg = toy_cfg()
    assert gower_distance(u, t, cfg) == pytest.approx(oracles.gower(u, t, CATS, NUMS, RANGES), abs=1e-12)
    assert hamming_distance(u, t, cfg) == pytest.approx(oracles.hamming(u, t, CATS, NUMS, RANGES), abs=1e-12)
    try:
        expected = oracles.cosine(u, t, CATS, NUMS, RANGES)
    except ZeroDivisionError:
        with pytest.raises(IncomparableError):
            cosine_distance(u, t, cfg)
        return
    assert cosine_distance(u, t, cfg) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(records, records, st.sampled_from(["gower", "hamming", "cosine"]))
def test_symmetry_identity_range(u, t, kind):
    assume(comparable(u, t))
    cfg = toy_cfg(kind)
    try:
        d = distance(u, t, cfg)
        back = distance(t, u, cfg)
    except IncomparableError:
        # cosine is undefined when either encoded vector has zero norm
        return
    cat_mismatch = any(u[v] is not None and t[v] is not None and u[v] != t[v] for v in CATS)
    # the cosine encoding is target-relative: a categorical mismatch is (1, 0) seen from either side
    if kind != "cosine" or not cat_mismatch:
        assert d == pytest.approx(back, abs=1e-12)
    if kind != "hamming":
        assert -1e-12 <= d <= 1 + 1e-12
    try:
        assert distance(u, u, cfg) == pytest.approx(0.0, abs=1e-12)
    except IncomparableError:
        pass


@settings(max_examples=200, deadline=None)
@given(complete_records, complete_records, complete_records)
def test_gower_triangle(a, b, c):
    cfg = toy_cfg()
    assert gower_distance(a, c, cfg) <= gower_distance(a, b, cfg) + gower_distance(b, c, cfg) + 1e-12


@settings(max_examples=100, deadline=None)
@given(records, records, st.floats(0.01, 100))
def test_weight_scaling(u, t, k):
    assume(comparable(u, t))
    w = {"Lithology": 1.0, "Setting": 2.0, "Permeability": 0.5, "Porosity": 3.0}
    a = gower_distance(u, t, toy_cfg(weights=w))
    b = gower_distance(u, t, toy_cfg(weights={v: k * x for v, x in w.items()}))
    assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(records, records, st.sampled_from(["gower", "hamming", "cosine"]))
def test_zero_weight_variable_is_inert(u, t, kind):
    full = toy_cfg(kind, weights={"Porosity": 0.0})
    reduced = full.without(["Porosity"])
    try:
        a = distance(u, t, full)
    except IncomparableError:
        with pytest.raises(IncomparableError):
            distance(u, t, reduced)
        return
    assert a == pytest.approx(distance(u, t, reduced), abs=1e-12)


@pytest.mark.parametrize("kind", ["gower", "hamming", "cosine"])
def test_vectorised_matches_pairwise(reservoirs, kind):
    cfg = MetricConfig.from_dataset(reservoirs, kind)
    rec = reservoirs.record(7)
    vec = distances_to(reservoirs, rec, cfg)
    for j in range(0, reservoirs.n_rows, 17):
        try:
            ref = distance(rec, reservoirs.record(j), cfg)
        except IncomparableError:
            ref = 1.0 if kind == "cosine" else np.nan
        if np.isnan(ref):
            assert np.isnan(vec[j])
        else:
            assert vec[j] == pytest.approx(ref, abs=1e-12)


def test_nearest_basic():
    data = make_dataset({"x": [0.0, 5.0, 1.0, 1.0, 9.0]})
    cfg = MetricConfig.from_dataset(data)
    idx, d = nearest_analogues(data, 2, cfg, 4)
    assert idx[0] == 3 and d[0] == 0.0
    assert sorted(idx) == [0, 1, 3, 4]
    assert 2 not in idx
    with pytest.raises(ConfigError):
        nearest_analogues(data, 2, cfg, 5)
    idx, _ = nearest_analogues(data, {"x": 4.0}, cfg, 5)
    assert list(idx) == [1, 2, 3, 0, 4]


def test_ties_break_on_index():
    data = make_dataset({"x": [1.0, 0.0, 2.0, 0.0, 2.0]})
    idx, _ = nearest_analogues(data, 0, MetricConfig.from_dataset(data), 4)
    assert list(idx) == [1, 2, 3, 4]


def test_exclude_variable(reservoirs):
    cfg = MetricConfig.from_dataset(reservoirs)
    idx, _ = nearest_analogues(reservoirs, 0, cfg, 10, exclude=["Porosity"])
    ref, _ = nearest_analogues(reservoirs.select([n for n in reservoirs.names if n != "Porosity"]), 0,
                               MetricConfig.from_dataset(reservoirs).without(["Porosity"]), 10)
    assert list(idx) == list(ref)


def test_distance_matrix_symmetric():
    data = make_dataset({"L": ["a", "b", "a", None], "x": [0.0, 1.0, 0.5, 0.2]})
    m = distance_matrix(data, MetricConfig.from_dataset(data))
    np.testing.assert_allclose(m, m.T, atol=1e-12)
    assert np.allclose(np.diag(m), 0.0)
