import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from helpers import chain_data, make_dataset
from resbn.discretize import TableDiscretizer
from resbn.distributions import CPT
from resbn.errors import ConfigError, FitError, IllegalMoveError
from resbn.graph import Dag, EdgeConstraints, apply_move, satisfies
from resbn.learn import (BayesNet, LearnConfig, fit_parameters, hill_climb, learn_network,
                         log_likelihood)
from resbn.score import EncodedData, Scorer, family_stats, _discrete_loglik, total_score

ABC = ("A", "B", "C")


def independent(n, seed, cols=("A", "B")):
    rng = np.random.default_rng(seed)
    return make_dataset({c: list(np.array(["x", "y"])[rng.integers(0, 2, n)]) for c in cols})


def test_independent_pair_gives_empty_graph():
    data = independent(500, 0)
    g = hill_climb(data, "bic")
    assert g.edges == frozenset()
    scores = [total_score(Dag(("A", "B"), e), data, "bic") for e in oracles.all_dags(("A", "B"))]
    assert total_score(g, data, "bic") == pytest.approx(max(scores))


@pytest.mark.parametrize("kind", ["bic", "k2"])
def test_chain_reaches_exhaustive_optimum(kind):
    data = chain_data(1000, seed=5)
    g = hill_climb(data, kind)
    best = max(total_score(Dag(ABC, e), data, kind) for e in oracles.all_dags(ABC))
    assert total_score(g, data, kind) == pytest.approx(best, abs=1e-9)
    # the skeleton is the chain, whatever the orientation
    assert {frozenset(e) for e in g.edges} == {frozenset("AB"), frozenset("BC")}


def test_required_edge_kept():
    data = independent(300, 1, ABC)
    g = hill_climb(data, "bic", constraints=EdgeConstraints(required={("A", "B")}))
    assert ("A", "B") in g.edges


def test_forbidden_edge_avoided():
    data = chain_data(1000, seed=2)
    c = EdgeConstraints(forbidden={("A", "B"), ("B", "A")})
    g = hill_climb(data, "bic", constraints=c)
    assert satisfies(g, c)


def test_bad_constraints():
    data = independent(50, 0, ABC)
    with pytest.raises(ConfigError):
        hill_climb(data, "bic", constraints=EdgeConstraints(required={("A", "Z")}))
    with pytest.raises(ConfigError):
        hill_climb(data, "bic", max_parents=1,
                   constraints=EdgeConstraints(required={("A", "C"), ("B", "C")}))
    with pytest.raises(ConfigError):
        hill_climb(independent(50, 0, ("A",)), "bic")


def test_discrete_child_never_gets_continuous_parent():
    rng = np.random.default_rng(0)
    x = rng.normal(size=400)
    d = np.where(x + rng.normal(scale=0.2, size=400) > 0, "hi", "lo")
    data = make_dataset({"D": list(d), "x": x})
    g = hill_climb(data, "bic")
    assert ("x", "D") not in g.edges
    assert ("D", "x") in g.edges


def legal_neighbours(g, data, constraints, cap):
    """Every single move the search may take, enumerated independently of the learner."""
    cont = {s.name for s in data.schema if not s.is_categorical}
    for kind, (u, v) in itertools.product(("add", "delete", "reverse"), itertools.permutations(g.nodes, 2)):
        try:
            h = apply_move(g, kind, (u, v))
        except IllegalMoveError:
            continue
        if not satisfies(h, constraints):
            continue
        if any(len(h.parents(n)) > cap for n in h.nodes):
            continue
        if any(p in cont and c not in cont for p, c in h.edges):
            continue
        yield h


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000), st.sampled_from(["bic", "k2", "mi"]))
def test_output_is_move_stable(seed, kind):
    rng = np.random.default_rng(seed)
    n = 300
    a = rng.integers(0, 3, n)
    b = (a + rng.integers(0, 2, n)) % 3
    c = rng.integers(0, 2, n)
    d = (b + c) % 2
    lab = np.array(["p", "q", "r"])
    data = make_dataset({"A": list(lab[a]), "B": list(lab[b]), "C": list(lab[c]), "D": list(lab[d])})
    cap = 3 if kind == "mi" else 4
    g = hill_climb(data, kind, max_parents=cap)
    base = total_score(g, data, kind)
    for h in legal_neighbours(g, data, EdgeConstraints(), cap):
        assert total_score(h, data, kind) <= base + 1e-9


def test_deterministic(complete):
    cfg = LearnConfig("k2", "kmeans5")
    a = learn_network(complete, cfg)
    b = learn_network(complete, cfg)
    assert a.dag == b.dag
    assert a.to_json() == b.to_json()


def test_cpt_mle():
    data = make_dataset({"X": ["a", "a", "a", "b"]})
    bn = fit_parameters(Dag(("X",)), data, alpha=0.0)
    assert bn.dists["X"].probs(()) == pytest.approx([0.75, 0.25])
    smoothed = fit_parameters(Dag(("X",)), data, alpha=1.0).dists["X"].probs(())
    assert smoothed == pytest.approx([4 / 6, 2 / 6])


def test_cpt_rows_sum_to_one(complete):
    bn = learn_network(complete)
    for dist in bn.dists.values():
        if isinstance(dist, CPT):
            for row in dist.table.values():
                assert sum(row) == pytest.approx(1.0, abs=1e-9)
        else:
            assert all(r.variance >= 1e-6 for r in dist.table.values())
            for r in dist.table.values():
                assert len(r.coefs) == len(dist.continuous_parents)


def test_exact_line():
    x = np.linspace(-3, 3, 40)
    data = make_dataset({"x": x, "y": 2 * x + 1})
    reg = fit_parameters(Dag(("x", "y"), {("x", "y")}), data).dists["y"].regression(())
    assert reg.intercept == pytest.approx(1.0)
    assert reg.coefs == pytest.approx((2.0,))
    assert reg.variance == 1e-6


def test_mixed_sign_flip():
    x = np.tile(np.linspace(-1, 1, 20), 2)
    d = ["a"] * 20 + ["b"] * 20
    y = np.where(np.array(d) == "a", x, -x)
    data = make_dataset({"D": d, "x": x, "y": y})
    dist = fit_parameters(Dag(("D", "x", "y"), {("D", "y"), ("x", "y")}), data).dists["y"]
    assert dist.regression(("a",)).coefs == pytest.approx((1.0,))
    assert dist.regression(("b",)).coefs == pytest.approx((-1.0,))


def test_small_config_uses_pooled():
    x = np.concatenate([np.linspace(0, 1, 30), [0.5, 0.7]])
    d = ["a"] * 30 + ["b"] * 2
    y = 3 * x
    data = make_dataset({"D": d, "x": x, "y": y})
    dist = fit_parameters(Dag(("D", "x", "y"), {("D", "y"), ("x", "y")}), data).dists["y"]
    assert dist.regression(("b",)) == dist.pooled
    assert dist.regression(("unseen",)) == dist.pooled


def test_unobserved_variable():
    data = make_dataset({"x": [1.0, 2.0], "y": [np.nan, np.nan]}, {"y": "continuous"})
    with pytest.raises(FitError, match="'y'"):
        fit_parameters(Dag(("x", "y")), data)


def test_loglik_matches_discrete_score_term(chain):
    dag = Dag(ABC, {("A", "B"), ("B", "C")})
    bn = fit_parameters(dag, chain, alpha=0.0)
    enc = EncodedData.build(chain, None)
    expected = sum(_discrete_loglik(family_stats(enc, n, dag.parents(n))) for n in ABC)
    assert log_likelihood(bn, chain) == pytest.approx(expected, abs=1e-9)


def test_loglik_matches_mixed_score_term():
    rng = np.random.default_rng(4)
    n = 300
    d = rng.integers(0, 2, n)
    x = rng.normal(size=n)
    y = np.where(d == 1, 2 * x, -x) + rng.normal(scale=0.5, size=n)
    data = make_dataset({"D": list(np.array(["a", "b"])[d]), "x": x, "y": y})
    dag = Dag(("D", "x", "y"), {("D", "y"), ("x", "y")})
    bn = fit_parameters(dag, data, alpha=0.0)
    enc = EncodedData.build(data, TableDiscretizer.fit(data, "kmeans", 5))
    sc = Scorer(enc, "bic_mixed")
    s = family_stats(enc, "y", ["D", "x"], mixed=True)
    ll_y = sum(g.loglik for g in s.groups)
    ll_x = sum(g.loglik for g in family_stats(enc, "x", [], mixed=True).groups)
    ll_d = _discrete_loglik(family_stats(enc, "D", []))
    assert log_likelihood(bn, data) == pytest.approx(ll_y + ll_x + ll_d, abs=1e-8)
    penalty = 0.5 * math.log(n) * 2 * 3
    assert sc.family(2, [0, 1]) == pytest.approx(ll_y - penalty, abs=1e-8)


def test_json_round_trip(complete):
    bn = learn_network(complete, LearnConfig("bic_mixed", "quantile5"))
    back = BayesNet.from_json(bn.to_json())
    assert back.to_json() == bn.to_json()
