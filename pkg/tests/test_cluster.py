import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from helpers import make_dataset, two_regime_data
from resbn.cluster import (OTHER, assign_cluster, build_filter_clusters, build_structure_clusters,
                           cut_tree, filter_route_impute, hierarchical_cluster, merge_small,
                           proportional_counts, sample_proportional)
from resbn.errors import ConfigError
from resbn.learn import LearnConfig

BIC = LearnConfig("bic", "kmeans5")


def purity(labels, truth):
    return sum(np.bincount(truth[labels == c]).max() for c in np.unique(labels)) / len(labels)


def random_dist(rng, n):
    pts = rng.random((n, 3))
    return np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))


def test_k_extremes():
    d = random_dist(np.random.default_rng(0), 6)
    labels, _ = hierarchical_cluster(d, k=6)
    assert sorted(labels) == list(range(6))
    labels, _ = hierarchical_cluster(d, k=1)
    assert set(labels) == {0}
    with pytest.raises(ConfigError):
        hierarchical_cluster(d, k=7)


def test_input_validation():
    with pytest.raises(ConfigError):
        hierarchical_cluster(np.ones((3, 3)), k=2)
    with pytest.raises(ConfigError):
        hierarchical_cluster(np.zeros((2, 3)), k=1)
    with pytest.raises(ConfigError):
        hierarchical_cluster(np.zeros((3, 3)), linkage="ward", k=1)


def test_height_cut_on_identical_graphs():
    labels, _ = hierarchical_cluster(np.zeros((5, 5)), height=0.5)
    assert set(labels) == {0}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(4, 9), st.sampled_from(["average", "complete", "single"]))
def test_blocks_match_exhaustive_partition(seed, n, method):
    rng = np.random.default_rng(seed)
    split = int(rng.integers(1, n))
    block = np.array([0] * split + [1] * (n - split))
    rng.shuffle(block)
    d = np.where(block[:, None] == block[None, :], rng.uniform(0, 1, (n, n)), rng.uniform(5, 6, (n, n)))
    d = np.triu(d, 1)
    d = d + d.T
    labels, _ = hierarchical_cluster(d, method, k=2)
    best = oracles.best_partition(d.tolist(), 2)
    assert oracles.same_partition(labels, best)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 12), st.integers(1, 4))
def test_permutation_invariance(seed, n, k):
    rng = np.random.default_rng(seed)
    k = min(k, n)
    d = random_dist(rng, n)
    perm = rng.permutation(n)
    a, _ = hierarchical_cluster(d, k=k)
    b, _ = hierarchical_cluster(d[np.ix_(perm, perm)], k=k)
    # same co-membership once the permutation is undone
    back = np.empty(n, dtype=int)
    back[perm] = b
    assert oracles.same_partition(a, [np.flatnonzero(back == c).tolist() for c in np.unique(back)])


def test_cut_tree_counts():
    d = random_dist(np.random.default_rng(3), 10)
    _, z = hierarchical_cluster(d, k=1)
    for k in range(1, 11):
        assert len(set(cut_tree(z, 10, k=k))) == k


def test_merge_small_warns():
    d = np.array([[0, 1, 9, 9], [1, 0, 9, 8], [9, 9, 0, 1], [9, 8, 1, 0.0]])
    labels = np.array([0, 0, 0, 1])
    with pytest.warns(RuntimeWarning, match="minimum fit size"):
        out = merge_small(labels, d, 2)
    assert set(out) == {0}


@pytest.fixture(scope="module")
def regimes():
    data, truth = two_regime_data(100, seed=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = build_structure_clusters(data, analogue_n=60, k=2, learn_cfg=BIC)
    return data, truth, model


def test_two_regimes_separate(regimes):
    _, truth, model = regimes
    assert purity(model.labels, truth) >= 0.9
    assert len(model.networks) == 2
    for c, bn in model.networks.items():
        assert bn.n_rows == int((model.labels == c).sum())


def test_assigner_on_training_rows(regimes):
    data, _, model = regimes
    for i in range(0, data.n_rows, 7):
        assert assign_cluster(model, data.record(i), k_assign=1) == model.labels[i]


def test_assigner_held_out():
    data, truth = two_regime_data(100, seed=1)
    rng = np.random.default_rng(0)
    perm = rng.permutation(data.n_rows)
    test_idx, train_idx = np.sort(perm[:40]), np.sort(perm[40:])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = build_structure_clusters(data.subset(train_idx), analogue_n=60, k=2, learn_cfg=BIC)
    regime_of = {c: np.bincount(truth[train_idx][model.labels == c]).argmax() for c in np.unique(model.labels)}
    hits = [regime_of[assign_cluster(model, data.record(i))] == truth[i] for i in test_idx]
    assert np.mean(hits) >= 0.9


def test_assigner_tie_goes_to_larger_cluster():
    from resbn.cluster import _assign
    from resbn.similarity import MetricConfig

    train = make_dataset({"x": [0.0, 2.0, 10.0, 10.1, 10.2]})
    labels = np.array([0, 1, 2, 2, 2])
    cfg = MetricConfig.from_dataset(train)
    # equidistant from rows 0 and 1; k=2 gives a one-one vote
    assert _assign(train, labels, cfg, {"x": 1.0}, 2) == 0
    labels = np.array([1, 0, 0, 0, 0])
    assert _assign(train, labels, cfg, {"x": 1.0}, 2) == 0


def test_structure_deterministic(regimes):
    data, _, model = regimes
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        again = build_structure_clusters(data, analogue_n=60, k=2, learn_cfg=BIC)
    assert (again.labels == model.labels).all()
    assert [d.edges for d in again.dags] == [d.edges for d in model.dags]


def test_structure_bad_n(regimes):
    data, _, _ = regimes
    with pytest.raises(ConfigError):
        build_structure_clusters(data, analogue_n=data.n_rows)


@pytest.fixture(scope="module")
def filtered():
    data, _ = two_regime_data(60, seed=2)
    cols = data.frame.copy()
    # a third filter value too small to stand alone
    cols.loc[:4, "M2"] = "rare"
    from resbn.data import Dataset
    data = Dataset(data.schema, cols)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = build_filter_clusters(data, "M2", BIC, selection="fixed", cut=2)
    return data, model


def test_filter_groups_cover_values(filtered):
    data, model = filtered
    observed = set(data.frame["M2"].dropna())
    covered = {v for g in model.groups.values() for v in g}
    assert covered == observed
    assert model.groups[OTHER] == ["rare"]
    in_clusters = [g for gs in model.clusters.values() for g in gs]
    assert sorted(in_clusters) == sorted(model.groups)
    for bn in model.networks.values():
        assert "M2" not in bn.dag.nodes


def test_filter_routing(filtered):
    data, model = filtered
    rec = data.record(70)
    c = model.route(rec)
    assert "m1" in {v for g in model.clusters[c] for v in model.groups[g]}
    with pytest.warns(RuntimeWarning, match="not seen"):
        assert model.route({**rec, "M2": "zzz"}) == model.largest_cluster()
    value, _ = filter_route_impute(model, {k: v for k, v in rec.items() if k != "x"}, "x", n=100)
    assert np.isfinite(value)
    label, _ = filter_route_impute(model, {k: v for k, v in rec.items() if k != "M2"}, "M2", n=100)
    assert label in {"m0", "m1", "rare"}


def test_filter_single_value_is_full_network():
    data, _ = two_regime_data(30, seed=0)
    sub = data.subset(np.arange(30))
    with pytest.warns(RuntimeWarning, match="single group"):
        model = build_filter_clusters(sub, "M1", BIC, selection="fixed", cut=1)
    assert len(model.networks) == 1
    assert model.networks[0].dag.edges == {e for e in model.full.dag.edges if "M1" not in e}


def test_filter_holdout_selects_a_cut():
    data, _ = two_regime_data(60, seed=3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = build_filter_clusters(data, "M1", BIC, selection="holdout", n_samples=50)
    assert set(model.cut_scores) == {1, 2}
    assert model.cut == min(model.cut_scores, key=lambda k: (model.cut_scores[k], k))


def test_continuous_filter_is_binned():
    data, _ = two_regime_data(60, seed=4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = build_filter_clusters(data, "x", BIC, selection="fixed", cut=1)
    assert model.binning is not None
    assert all(v.startswith("bin") for g in model.groups.values() for v in g)


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.integers(0, 9), st.integers(0, 50), min_size=1), st.integers(0, 1000))
def test_proportional_counts(sizes, n):
    total = sum(sizes.values())
    if total == 0:
        with pytest.raises(ConfigError):
            proportional_counts(sizes, n)
        return
    out = proportional_counts(sizes, n)
    assert sum(out.values()) == n
    for k, s in sizes.items():
        exact = n * s / total
        assert np.floor(exact) <= out[k] <= np.ceil(exact)


def test_sample_proportional(filtered):
    _, model = filtered
    df = sample_proportional(model, 100, seed=0)
    assert len(df) == 100
    expected = proportional_counts(model.cluster_sizes(), 100)
    assert df["cluster"].value_counts().to_dict() == {k: v for k, v in expected.items() if v}
