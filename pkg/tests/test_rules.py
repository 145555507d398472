import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from conftest import random_pmf
from kmlearn.model import KolmogorovModel, predict
from kmlearn.rules import (
    RULE_REPORT_SCHEMA,
    Rule,
    build_adjacency,
    influence_scores,
    maximal_set,
    mine_rules,
    support_included,
)

indicator_sets = st.integers(1, 7).flatmap(
    lambda D: hnp.arrays(np.int8, st.tuples(st.integers(1, 9), st.just(D)), elements=st.integers(0, 1))
)


def _model(psis):
    psis = np.asarray(psis, dtype=float)
    n, D = psis.shape
    return KolmogorovModel(np.full((1, D), 1 / D), psis, [1], np.arange(1, n + 1))


class TestSupportIncluded:
    def test_toy(self, toy):
        assert support_included(toy.psi[0], toy.psi[1])
        assert not support_included(toy.psi[1], toy.psi[0])

    @given(hnp.arrays(np.int8, st.integers(1, 10), elements=st.integers(0, 1)))
    def test_trivial_cases(self, psi):
        assert support_included(psi, np.ones_like(psi))
        assert support_included(np.zeros_like(psi), psi)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            support_included([1, 0], [1, 0, 1])


class TestAdjacency:
    def test_toy(self, toy):
        a = build_adjacency(toy.psi)
        assert a[1, 0] == 1 and a[0, 1] == 0
        assert np.all(np.diag(a) == 0)

    def test_identical_items(self):
        a = build_adjacency(np.tile([1, 0, 1], (4, 1)))
        np.testing.assert_array_equal(a, 1 - np.eye(4))

    def test_matches_pairwise(self, rng):
        P = rng.integers(0, 2, (12, 5))
        a = build_adjacency(P)
        for i in range(12):
            for j in range(12):
                assert a[i, j] == (i != j and support_included(P[j], P[i]))

    def test_transitive(self, rng):
        for _ in range(1000):
            P = rng.integers(0, 2, (int(rng.integers(1, 8)), int(rng.integers(1, 5))))
            a = build_adjacency(P).astype(bool)
            n = len(P)
            for i in range(n):
                for j in range(n):
                    for k in range(n):
                        if a[i, j] and a[j, k] and i != k:
                            assert a[i, k]

    def test_empty(self):
        with pytest.raises(ValueError):
            build_adjacency(np.zeros((0, 3)))


class TestInfluence:
    def test_toy(self, toy):
        np.testing.assert_array_equal(influence_scores(build_adjacency(toy.psi)), [0.0, 0.5])

    def test_disjoint(self):
        assert not influence_scores(build_adjacency(np.eye(4))).any()

    @pytest.mark.parametrize("k", [1, 2, 5, 9])
    def test_all_ones_item(self, rng, k):
        P = rng.integers(0, 2, (k, 4))
        P[0] = 1
        beta = influence_scores(build_adjacency(P))
        assert beta[0] == pytest.approx((k - 1) / k)

    @given(indicator_sets)
    def test_range_and_recomputation(self, P):
        a = build_adjacency(P)
        beta = influence_scores(a)
        assert np.all((beta >= 0) & (beta < 1))
        np.testing.assert_array_equal(beta, a.sum(axis=1) / len(P))


class TestMaximalSet:
    def test_toy(self, toy):
        assert maximal_set(toy.psi) == []

    def test_singleton(self):
        assert maximal_set([[1, 0], [1, 1], [0, 0]], item_ids=[7, 8, 9]) == [8]


class TestMining:
    def test_toy_rule_pair(self, toy):
        report = mine_rules(toy, min_beta=0.0)
        assert report.rules == [Rule(2, 1, "likes"), Rule(1, 2, "dislikes")]
        assert str(report.rules[0]) == "likes item 2 => likes item 1"
        assert str(report.rules[1]) == "dislikes item 1 => dislikes item 2"

    def test_threshold_one(self, rng):
        P = rng.integers(0, 2, (6, 4))
        P[2] = 1
        report = mine_rules(_model(P), min_beta=1.0)
        assert report.influential() == []
        assert 3 in report.maximal_set
        # rules for the all-ones item are listed regardless of the threshold
        assert {r.consequent for r in report.rules if r.direction == "likes"} == {1, 2, 4, 5, 6}

    @given(indicator_sets)
    def test_one_pair_per_edge(self, P):
        report = mine_rules(_model(P), min_beta=0.0)
        assert len(report.rules) == 2 * int(report.adjacency.sum())
        likes = {(r.antecedent, r.consequent) for r in report.rules if r.direction == "likes"}
        dislikes = {(r.consequent, r.antecedent) for r in report.rules if r.direction == "dislikes"}
        assert likes == dislikes

    def test_maximal_items_cover_all(self, rng):
        P = rng.integers(0, 2, (8, 3))
        P[[1, 4]] = 1
        report = mine_rules(_model(P), min_beta=0.99)
        for m in report.maximal_set:
            covered = {r.consequent for r in report.rules if r.antecedent == m and r.direction == "likes"}
            assert covered == set(range(1, 9)) - {m}

    def test_deterministic(self, rng):
        m = _model(rng.integers(0, 2, (10, 4)))
        assert mine_rules(m).to_dict() == mine_rules(m).to_dict()

    def test_influential_order(self):
        P = [[1, 1, 1], [1, 1, 0], [1, 0, 0], [0, 0, 0]]
        report = mine_rules(_model(P), min_beta=0.5)
        assert report.influential() == [(1, 0.75), (2, 0.5)]

    def test_report_schema(self, toy, tmp_path):
        report = mine_rules(toy, min_beta=0.0)
        path = tmp_path / "r.json"
        report.save(path)
        doc = json.loads(path.read_text())
        jsonschema.validate(doc, RULE_REPORT_SCHEMA)
        assert doc["adjacency_nnz"] == [[2, 1]]
        assert doc["rules"] == [
            {"if": 2, "then": 1, "direction": "likes"},
            {"if": 1, "then": 2, "direction": "dislikes"},
        ]


class TestSoundness:
    @given(st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_measure_monotone(self, D, seed):
        rng = np.random.default_rng(seed)
        theta = random_pmf(rng, D)
        big = rng.integers(0, 2, D).astype(float)
        small = big * rng.integers(0, 2, D)
        m = KolmogorovModel(theta[None], np.vstack([small, big]), [1], [1, 2])
        assert support_included(small, big)
        assert predict(m, 1, 1) <= predict(m, 1, 2)
