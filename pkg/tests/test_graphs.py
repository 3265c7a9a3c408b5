import itertools
import json

import numpy as np
import pytest

from losam.graphs import (
    Dag,
    GraphError,
    all_orders,
    er_random_dag,
    fully_connected_dag,
    is_valid_order,
    topological_sort,
)


class TestDagConstruction:
    def test_rejects_self_loop(self):
        with pytest.raises(GraphError, match="self-loop"):
            Dag(3, [(1, 1)])

    def test_rejects_cycle(self):
        with pytest.raises(GraphError, match="cycle"):
            Dag(3, [(0, 1), (1, 2), (2, 0)])

    def test_rejects_out_of_range(self):
        with pytest.raises(GraphError, match="out of range"):
            Dag(2, [(0, 2)])

    def test_default_labels(self):
        assert Dag(2).labels == ("x0", "x1")

    def test_json_round_trip(self, star_dag):
        again = Dag.from_json(star_dag.to_json())
        assert again.edges == star_dag.edges
        assert again.labels == star_dag.labels

    def test_adjacency_round_trip(self, star_dag):
        again = Dag.from_adjacency(star_dag.to_adjacency(), star_dag.labels)
        assert again.edges == star_dag.edges

    def test_csv_round_trip(self, star_dag, tmp_path):
        path = tmp_path / "dag.csv"
        star_dag.to_csv(path)
        again = Dag.from_csv(path)
        assert again.edges == star_dag.edges
        assert again.labels == star_dag.labels


class TestStructuralQueries:
    def test_chain_ancestors(self, chain3):
        assert chain3.ancestors(2) == {0, 1}

    def test_chain_roots_leaves(self, chain3):
        assert chain3.roots() == {0}
        assert chain3.leaves() == {2}

    def test_star_roots(self, star_dag):
        assert star_dag.roots() == {0, 1, 2}

    def test_descendants(self, star_dag):
        assert star_dag.descendants(0) == {3, 4, 5}

    def test_index_bounds(self, chain3):
        with pytest.raises(GraphError):
            chain3.parents(7)


class TestRootDescendantPartition:
    def test_star_partition(self, star_dag):
        assert star_dag.mrd_set() == {4, 5}
        assert star_dag.srd_set() == {3}

    def test_chain(self, chain3):
        assert chain3.mrd_set() == set()
        assert chain3.srd_set() == {1, 2}

    def test_collider(self, collider3):
        assert collider3.mrd_set() == {2}

    def test_partition_property(self):
        for s in range(1000):
            d = 2 + s % 7
            dag = er_random_dag(d, min(d, d * (d - 1) / 2), 50_000 + s)
            roots, srd, mrd = dag.roots(), dag.srd_set(), dag.mrd_set()
            assert roots | srd | mrd == set(range(d))
            assert not (roots & srd or roots & mrd or srd & mrd)


class TestDSeparation:
    def test_chain(self, chain3):
        assert chain3.d_separated(0, 2, {1})
        assert not chain3.d_separated(0, 2)

    def test_collider(self, collider3):
        assert collider3.d_separated(0, 1)
        assert not collider3.d_separated(0, 1, {2})

    def test_collider_descendant_opens(self):
        dag = Dag(4, [(0, 2), (1, 2), (2, 3)])
        assert not dag.d_separated(0, 1, {3})

    def test_star_pairs(self, star_dag):
        assert star_dag.d_separated(0, 1)
        assert not star_dag.d_separated(4, 0)

    def test_rejects_endpoint_in_set(self, chain3):
        with pytest.raises(GraphError):
            chain3.d_separated(0, 2, {0})

    def test_matches_bruteforce(self):
        for s in range(60):
            d = 3 + s % 4
            dag = er_random_dag(d, d, 60_000 + s)
            for a, b in itertools.combinations(range(d), 2):
                others = [v for v in range(d) if v not in (a, b)]
                for r in range(min(3, len(others)) + 1):
                    for z in itertools.combinations(others, r):
                        assert dag.d_separated(a, b, z) == dag.d_separated_bruteforce(
                            a, b, z
                        ), (sorted(dag.edges), a, b, z)

    def test_vp_oracle_matches_mrd(self):
        # a vertex dependent on two mutually independent vertices is
        # exactly a multi-root descendant
        for s in range(200):
            d = 3 + s % 6
            dag = er_random_dag(d, min(d, d * (d - 1) / 2), 70_000 + s)
            vp = set()
            for v in range(d):
                partners = [
                    u for u in range(d) if u != v and not dag.d_separated(v, u)
                ]
                if any(
                    dag.d_separated(a, b)
                    for a, b in itertools.combinations(partners, 2)
                ):
                    vp.add(v)
            assert vp == dag.mrd_set(), sorted(dag.edges)


class TestOrders:
    def test_chain_valid(self, chain3):
        assert is_valid_order(chain3, [0, 1, 2])
        assert not is_valid_order(chain3, [2, 1, 0])

    def test_empty_graph_any_order(self):
        dag = Dag(4)
        assert is_valid_order(dag, [3, 1, 0, 2])

    def test_non_permutation_rejected(self, chain3):
        with pytest.raises(GraphError):
            is_valid_order(chain3, [0, 0, 1])

    def test_topological_sort_is_valid(self):
        for s in range(100):
            d = 2 + s % 7
            dag = er_random_dag(d, min(d, d * (d - 1) / 2), 80_000 + s)
            assert is_valid_order(dag, topological_sort(dag))

    def test_fully_connected(self):
        dag = fully_connected_dag(4)
        assert len(dag.edges) == 6
        assert topological_sort(dag) == [0, 1, 2, 3]

    def test_all_orders_small(self):
        assert len(list(all_orders(3))) == 6


class TestErRandomDag:
    def test_single_pair_always_present(self):
        # with avg_edges equal to the pair count the keep probability is one
        for s in range(25):
            assert len(er_random_dag(2, 1, s).edges) == 1

    def test_single_vertex(self):
        assert er_random_dag(1, 0, 0).edges == frozenset()

    def test_expected_edge_count(self):
        # Monte Carlo mean of the stated Bernoulli model: 10k seeds of
        # Binomial(45, 10/45) have mean 10 with standard error ~0.028
        counts = [len(er_random_dag(10, 10, s).edges) for s in range(10_000)]
        assert abs(np.mean(counts) - 10) < 0.3

    def test_deterministic(self):
        assert er_random_dag(8, 8, 123).edges == er_random_dag(8, 8, 123).edges

    def test_rejects_excess_edges(self):
        with pytest.raises(GraphError, match="avg_edges"):
            er_random_dag(3, 4, 0)
