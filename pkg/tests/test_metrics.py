import numpy as np
import pytest

from losam.graphs import Dag, GraphError, all_orders, er_random_dag, is_valid_order
from losam.metrics import a_top, prune_edges, rand_sort, shd_f1, var_sort


class TestATop:
    def test_valid_order_scores_one(self, star_dag):
        assert a_top([0, 1, 2, 3, 4, 5], star_dag).a_top == 1.0

    def test_reversed_chain(self, chain3):
        score = a_top([2, 1, 0], chain3)
        assert score.d_top == 2
        assert score.a_top == 0.0

    def test_half_recoverable(self, chain3):
        assert a_top([1, 0, 2], chain3).a_top == 0.5

    def test_edgeless_undefined(self):
        assert a_top([1, 0], Dag(2)) is None

    def test_non_permutation_rejected(self, chain3):
        with pytest.raises(GraphError):
            a_top([0, 1], chain3)

    def test_validity_equivalence_exhaustive(self):
        for s in range(40):
            d = 2 + s % 4
            dag = er_random_dag(d, min(d, d * (d - 1) / 2), 10_000 + s)
            if not dag.edges:
                continue
            for order in all_orders(d):
                score = a_top(order, dag)
                assert (score.a_top == 1.0) == is_valid_order(dag, list(order))


class TestShdF1:
    def test_identical(self, star_dag):
        score = shd_f1(star_dag, star_dag)
        assert score.shd == 0 and score.f1 == 1.0

    def test_single_reversed_edge(self):
        truth = Dag(2, [(0, 1)])
        pred = Dag(2, [(1, 0)])
        score = shd_f1(pred, truth)
        assert score.shd == 1
        assert score.reversed == 1
        assert score.tp == 0
        assert score.f1 == 0.0

    def test_missing_edge(self):
        truth = Dag(2, [(0, 1)])
        score = shd_f1(Dag(2), truth)
        assert score.shd == 1 and score.fn == 1 and score.f1 == 0.0

    def test_extra_edge(self):
        pred = Dag(3, [(0, 1), (1, 2)])
        truth = Dag(3, [(0, 1)])
        score = shd_f1(pred, truth)
        assert score.shd == 1 and score.fp == 1
        assert score.precision == 0.5 and score.recall == 1.0

    def test_double_count_mode(self):
        truth = Dag(2, [(0, 1)])
        pred = Dag(2, [(1, 0)])
        assert shd_f1(pred, truth, double_count_reversed=True).shd == 2

    def test_symmetry(self):
        for s in range(60):
            truth = er_random_dag(5, 5, 20_000 + s)
            pred = er_random_dag(5, 5, 30_000 + s)
            assert shd_f1(pred, truth).shd == shd_f1(truth, pred).shd

    def test_zero_iff_equal(self):
        for s in range(60):
            truth = er_random_dag(5, 5, 40_000 + s)
            pred = er_random_dag(5, 5, 41_000 + s)
            assert (shd_f1(pred, truth).shd == 0) == (pred.edges == truth.edges)

    def test_vertex_count_mismatch(self):
        with pytest.raises(GraphError):
            shd_f1(Dag(2), Dag(3))

    def test_invariant_counts(self):
        for s in range(40):
            truth = er_random_dag(6, 6, 50_000 + s)
            pred = er_random_dag(6, 6, 51_000 + s)
            score = shd_f1(pred, truth)
            assert score.shd == score.fp + score.fn + score.reversed
            assert score.tp + score.reversed + score.fn == len(truth.edges)
            assert score.tp + score.reversed + score.fp == len(pred.edges)


class TestPruneEdges:
    def test_chain_prunes_skip_edge(self, linear_chain_data):
        chain3, data = linear_chain_data
        pred = prune_edges(data.values, [0, 1, 2], rng_seed=3)
        assert pred.edges == frozenset({(0, 1), (1, 2)})

    def test_collider_keeps_both_parents(self, collider_data):
        _, data = collider_data
        pred = prune_edges(data.values, [0, 1, 2], rng_seed=4)
        assert {(0, 2), (1, 2)} <= set(pred.edges)
        assert (0, 1) not in pred.edges and (1, 0) not in pred.edges

    def test_independent_columns_empty(self):
        values = np.random.default_rng(5).standard_normal((500, 3))
        assert prune_edges(values, [0, 1, 2], rng_seed=6).edges == frozenset()

    def test_respects_order(self, linear_chain_data):
        _, data = linear_chain_data
        pred = prune_edges(data.values, [2, 1, 0], rng_seed=7)
        rank = {v: i for i, v in enumerate([2, 1, 0])}
        assert all(rank[p] < rank[c] for p, c in pred.edges)

    def test_rejects_bad_order(self):
        with pytest.raises(GraphError):
            prune_edges(np.zeros((10, 2)), [0, 0], rng_seed=0)


class TestBaselines:
    def test_var_sort_orders_by_variance(self):
        rng = np.random.default_rng(8)
        values = rng.standard_normal((400, 3)) * np.array([3.0, 1.0, 2.0])
        assert var_sort(values) == [1, 2, 0]

    def test_var_sort_ties_by_index(self):
        values = np.tile(np.random.default_rng(9).standard_normal(100)[:, None], 3)
        assert var_sort(values) == [0, 1, 2]

    def test_rand_sort_reproducible(self):
        assert rand_sort(6, 11) == rand_sort(6, 11)
        assert sorted(rand_sort(6, 11)) == list(range(6))

    def test_rand_sort_chain_mean_half(self, chain3):
        scores = [a_top(rand_sort(3, s), chain3).a_top for s in range(10_000)]
        assert abs(np.mean(scores) - 0.5) < 0.05
