import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnisel.core import AdjacencyGraph, standardize
from gnisel.gni import (
    DiffMatrix,
    argmax_sparsest,
    build_diff_matrix,
    default_m,
    expected_mse_random,
    gni_score,
    mse_model,
    neighbor_predict,
    node_gni,
    pair_discrepancy,
    select_gni,
)
from gnisel.synthgen import GraphSpec, PrecisionParams, generate


def diff_of(values):
    return DiffMatrix(np.asarray(values, dtype=float), source_n=2, seed=0)


def random_graph(p, rng, q=0.4):
    upper = np.triu(rng.random((p, p)) < q, 1)
    return AdjacencyGraph((upper | upper.T).astype(np.uint8))


def permutation_oracle(xhat, x):
    """Average MSE over every column permutation of ``xhat``, row by row."""
    m, p = x.shape
    perms = list(itertools.permutations(range(p)))
    per_row = [
        sum(np.mean((xhat[i, list(q)] - x[i]) ** 2) for q in perms) / len(perms) for i in range(m)
    ]
    return float(np.mean(per_row))


def loop_predict(x, graph):
    out = np.zeros_like(x)
    for w in range(graph.p):
        nb = np.flatnonzero(graph.entries[w])
        if nb.size:
            out[:, w] = x[:, nb].mean(axis=1)
    return out


class TestDiffMatrix:
    def test_constant_column_degenerate(self):
        x = np.column_stack([np.full(10, 3.0), np.arange(10.0)])
        xb = build_diff_matrix(x, m=50, seed=1)
        assert xb.degenerate_columns == {0}
        np.testing.assert_array_equal(xb.values[:, 0], 0.0)

    def test_two_rows_only_two_raw_values(self):
        x = np.array([[0.0, 1.0], [2.0, 4.0]])
        xb = build_diff_matrix(x, m=40, seed=3)
        # the standardized column has at most two distinct values, and 0 maps to the minimum
        for j in range(2):
            assert len(np.unique(np.round(xb.values[:, j], 12))) <= 2

    def test_standardized_and_deterministic(self):
        x = np.random.default_rng(0).normal(size=(30, 5))
        a = build_diff_matrix(x, m=200, seed=9)
        assert a.m == 200 and a.p == 5
        assert np.abs(a.values.mean(axis=0)).max() < 1e-8
        assert np.abs(a.values.std(axis=0, ddof=1) - 1).max() < 1e-8
        np.testing.assert_array_equal(a.values, build_diff_matrix(x, m=200, seed=9).values)

    def test_default_m(self):
        assert default_m(50) == 2500
        assert default_m(200) == 10_000
        assert build_diff_matrix(np.random.default_rng(0).normal(size=(7, 2))).m == 49

    def test_errors(self):
        with pytest.raises(ValueError):
            build_diff_matrix(np.ones((5, 2)), m=1)
        with pytest.raises(ValueError):
            build_diff_matrix(np.ones((1, 2)), m=4)


class TestPredict:
    def test_empty_graph(self):
        x = np.random.default_rng(0).normal(size=(5, 4))
        np.testing.assert_array_equal(neighbor_predict(diff_of(x), AdjacencyGraph.empty(4)), 0.0)

    def test_two_neighbours(self):
        g = AdjacencyGraph.from_edges(3, [(0, 1), (0, 2)])
        pred = neighbor_predict(diff_of([[9.0, 1.0, 2.0]]), g)
        assert pred[0, 0] == 1.5

    def test_complete_graph_matches_loop(self):
        x = np.random.default_rng(1).normal(size=(6, 5))
        g = AdjacencyGraph.complete(5)
        pred = neighbor_predict(diff_of(x), g)
        np.testing.assert_allclose(pred, loop_predict(x, g), atol=1e-14)
        np.testing.assert_allclose(pred[:, 0], x[:, 1:].mean(axis=1), atol=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 9), st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_random_graphs_match_loop(self, p, m, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(m, p))
        g = random_graph(p, rng)
        np.testing.assert_allclose(neighbor_predict(diff_of(x), g), loop_predict(x, g), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            neighbor_predict(diff_of(np.zeros((2, 3))), AdjacencyGraph.empty(4))


class TestMse:
    def test_identical(self):
        x = np.random.default_rng(0).normal(size=(4, 3))
        assert mse_model(x, diff_of(x)) == 0.0

    def test_zero_predictor(self):
        x = np.random.default_rng(1).normal(size=(4, 3))
        assert mse_model(np.zeros_like(x), diff_of(x)) == pytest.approx(np.mean(x**2))
        assert expected_mse_random(np.zeros_like(x), diff_of(x)) == pytest.approx(np.mean(x**2))

    def test_two_by_two(self):
        assert mse_model(np.zeros((2, 2)), diff_of([[1, -1], [-1, 1]])) == 1.0


class TestExpectedRandom:
    def test_hand_row(self):
        xhat = np.array([[1.0, 2.0]])
        x = np.array([[3.0, 4.0]])
        assert expected_mse_random(xhat, diff_of(x)) == pytest.approx(4.5, abs=1e-15)
        assert permutation_oracle(xhat, x) == pytest.approx(4.5, abs=1e-15)

    def test_twenty_four_permutations(self):
        rng = np.random.default_rng(5)
        xhat, x = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
        assert abs(expected_mse_random(xhat, diff_of(x)) - permutation_oracle(xhat, x)) < 1e-12

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 6), st.integers(2, 5), st.integers(0, 2**32 - 1))
    def test_permutation_oracle(self, m, p, seed):
        rng = np.random.default_rng(seed)
        xhat, x = rng.normal(size=(m, p)), rng.normal(size=(m, p))
        assert abs(expected_mse_random(xhat, diff_of(x)) - permutation_oracle(xhat, x)) < 1e-12

    def test_needs_two_columns(self):
        with pytest.raises(ValueError):
            expected_mse_random(np.zeros((3, 1)), diff_of(np.zeros((3, 1))))


class TestScore:
    def test_empty_graph_is_zero(self):
        xb = build_diff_matrix(np.random.default_rng(0).normal(size=(20, 6)), m=100, seed=2)
        assert gni_score(xb, AdjacencyGraph.empty(6)).total == 0.0

    @settings(max_examples=80, deadline=None)
    @given(st.integers(2, 30), st.integers(2, 8), st.integers(0, 2**32 - 1))
    def test_closed_form_identity(self, m, p, seed):
        rng = np.random.default_rng(seed)
        xb = diff_of(rng.normal(size=(m, p)))
        sc = gni_score(xb, random_graph(p, rng))
        assert abs(sc.total - (sc.expected_mse_random - sc.mse_model)) < 1e-12

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(40, 7))
        g = random_graph(7, rng)
        perm = rng.permutation(7)
        xb = diff_of(x)
        # relabel moves old vertex perm[k] to position k, matching column order x[:, perm]
        relabeled = AdjacencyGraph(g.entries[np.ix_(perm, perm)])
        a = gni_score(xb, g).total
        b = gni_score(diff_of(x[:, perm]), relabeled).total
        assert a == pytest.approx(b, abs=1e-13)

    def test_node_scores_sum_to_total(self):
        rng = np.random.default_rng(8)
        xb = diff_of(rng.normal(size=(25, 6)))
        g = random_graph(6, rng)
        assert node_gni(xb, g).sum() == pytest.approx(gni_score(xb, g).total, abs=1e-12)
        np.testing.assert_array_equal(node_gni(xb, AdjacencyGraph.empty(6)), 0.0)

    def test_true_graph_beats_rewiring(self):
        true_scores, fake_scores = [], []
        for seed in range(50):
            prob = generate(GraphSpec("random", 20, edge_prob=0.15, seed=seed), 200, 1000 + seed,
                            PrecisionParams(0.3, 0.1))
            xb = build_diff_matrix(prob.data, seed=seed)
            true_scores.append(gni_score(xb, prob.truth).total)
            # degree-matched null: same graph on shuffled vertex labels
            perm = np.random.default_rng(seed).permutation(20)
            fake = AdjacencyGraph(prob.truth.entries[np.ix_(perm, perm)])
            fake_scores.append(gni_score(xb, fake).total)
        d = np.asarray(true_scores) - np.asarray(fake_scores)
        assert d.mean() > 3 * d.std(ddof=1) / math.sqrt(len(d))


class TestSelect:
    def setup_method(self):
        prob = generate(GraphSpec("hub", 20, hub_count=2, seed=1), 200, 2, PrecisionParams(0.3, 0.1))
        self.data = standardize(prob.data)
        self.truth = prob.truth

    def test_single_candidate(self):
        assert select_gni(self.data, [self.truth]).index == 0

    def test_empty_versus_truth(self):
        sel = select_gni(self.data, [AdjacencyGraph.empty(20), self.truth], seed=4)
        assert sel.index == 1
        assert sel.totals[0] == 0.0 < sel.totals[1]

    def test_identical_candidates(self):
        assert select_gni(self.data, [self.truth] * 3).index == 0

    def test_shared_diff_matrix(self):
        sel = select_gni(self.data, [self.truth, AdjacencyGraph.complete(20)], m=300, seed=5)
        assert sel.diff.m == 300
        direct = gni_score(build_diff_matrix(self.data, 300, 5), self.truth).total
        assert sel.totals[0] == direct

    def test_empty_path(self):
        with pytest.raises(ValueError):
            select_gni(self.data, [])

    def test_argmax_sparsest(self):
        assert argmax_sparsest([1.0, 3.0, 3.0], [0, 9, 4]) == 2
        assert argmax_sparsest([2.0, 2.0], [5, 5]) == 0


def test_dependence_shrinks_discrepancy():
    est = [pair_discrepancy(r, 0.1, 20_000, seed=1) for r in (0.0, 0.3, 0.6, 0.9)]
    assert est[0].mean == pytest.approx(4 - 8 / math.pi, abs=5 * est[0].std_error)
    for a, b in zip(est, est[1:]):
        assert a.mean - b.mean > 3 * math.hypot(a.std_error, b.std_error)
    with pytest.raises(ValueError):
        pair_discrepancy(0.5, 0.0)
