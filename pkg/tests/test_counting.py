import math
from fractions import Fraction

import pytest

from lllkit import (
    MtaSystem,
    Partition,
    count_labelled_trees,
    enumerate_labelled_trees,
    enumerate_small_landscapes,
    fuss_catalan,
    labelled_tree_bound,
    landscape_class_bound,
    q_value_upper_bounds,
    q_values_exact,
    tail_estimate,
    tree_count_iterates,
)
from lllkit.counting import (
    critical_abscissa,
    landscape_class_prefactor,
    _canonical_key,
)
from lllkit.instances import disjoint_clause_instance


class TestTreeCounts:
    def test_small_values(self):
        assert count_labelled_trees(2, 0) == 0
        assert count_labelled_trees(2, 1) == 1
        assert count_labelled_trees(2, 3) == 5
        assert count_labelled_trees(3, 2) == 3

    def test_delta_one_paths(self):
        for n in range(1, 6):
            assert count_labelled_trees(1, n) == 1

    def test_matches_closed_form(self):
        for delta in (2, 3, 4):
            for n in range(0, 13):
                assert count_labelled_trees(delta, n) == fuss_catalan(delta, n)

    def test_matches_brute_force(self):
        for delta in (2, 3, 4):
            for n in range(0, 8):
                assert count_labelled_trees(delta, n) == enumerate_labelled_trees(delta, n)

    def test_below_bound(self):
        for delta in (2, 3, 4):
            for n in range(1, 13):
                assert count_labelled_trees(delta, n) <= labelled_tree_bound(delta, n)

    def test_bound_values(self):
        assert labelled_tree_bound(2, 3) == 64
        assert labelled_tree_bound(3, 4) == Fraction(27, 4) ** 4
        with pytest.raises(ValueError):
            labelled_tree_bound(1, 3)

    def test_coefficients_stabilize(self):
        for delta in (2, 3, 4):
            for n in (3, 5, 8):
                iterates = tree_count_iterates(delta, n, n + 3)
                frozen = iterates[n]
                assert iterates[n + 1] == frozen
                assert iterates[n + 3] == frozen
                assert frozen[n] == fuss_catalan(delta, n)


class TestQIteration:
    def test_exact_values_below_limit(self):
        # exact rationals are feasible for a short horizon at any delta
        for delta in (2, 3, 4):
            limit = Fraction(1, delta - 1)
            values = q_values_exact(delta, 7)
            assert values[0] == critical_abscissa(delta)
            assert all(v <= limit for v in values)
            assert all(a < b for a, b in zip(values, values[1:]))

    def test_upper_bounds_dominate_exact(self):
        for delta in (2, 3, 4):
            exact = q_values_exact(delta, 7)
            bounds = q_value_upper_bounds(delta, 7)
            assert all(e <= b for e, b in zip(exact, bounds))
            # the rounding is tight: within 2^-400 at each step
            slack = Fraction(1, 2**400)
            assert all(b - e < slack for e, b in zip(exact, bounds))

    def test_bounds_below_limit_through_horizon(self):
        for delta in (2, 3, 4):
            limit = Fraction(1, delta - 1)
            assert all(v <= limit for v in q_value_upper_bounds(delta, 20))

    def test_exact_delta_two_long_horizon(self):
        values = q_values_exact(2, 20)
        assert all(v <= 1 for v in values)
        assert values[-1] > Fraction(4, 5)  # approaching the fixed point 1


class TestLandscapeBound:
    def test_prefactor_value(self):
        # D=1, delta=2, N1=1, p=1, b=2:
        # 1 * 2^1 * 1! * 2! * 2^2 * 2 * 1 * 1 = 32
        assert landscape_class_prefactor(1, 2, 1, 1, 2) == 32

    def test_zero_forest_reduces_to_prefactor(self):
        assert landscape_class_bound(1, 2, 1, 2, 0, 2, 2) == landscape_class_prefactor(
            1, 2, 2, 2, 2
        )

    def test_monotone_in_each_argument(self):
        base = (1, 2, 1, 2, 2, 2, 2)
        value = landscape_class_bound(*base)
        for i in range(len(base)):
            bumped = list(base)
            bumped[i] += 1
            assert landscape_class_bound(*bumped) >= value

    def test_delta_below_two_rejected(self):
        with pytest.raises(ValueError):
            landscape_class_bound(1, 1, 1, 1, 1, 1, 2)


class TestEnumerateSmall:
    def test_single_vertex_empty_forest(self):
        # rules {eps} or {} (beta = 1), final in {0,1}, one part
        result = enumerate_small_landscapes(0, 2, 1, 1, 0, 1, 2)
        assert result.complete
        assert result.count == 4

    def test_counts_below_bound(self):
        for point in ((1, 2, 1, 1, 1, 1, 2), (1, 2, 1, 2, 1, 2, 2), (1, 2, 1, 2, 2, 2, 2)):
            result = enumerate_small_landscapes(*point)
            bound = landscape_class_bound(*point)
            assert result.complete
            assert result.count <= bound

    def test_budget_flag(self):
        result = enumerate_small_landscapes(1, 2, 1, 2, 2, 2, 2, budget=50)
        assert not result.complete
        assert result.examined == 51

    def test_isomorphic_relabelings_collapse(self):
        from lllkit import LocalRule, VariableGraph

        g1 = VariableGraph([(1,), ()])
        g2 = VariableGraph([(), (0,)])
        r1 = LocalRule.for_graph(g1, 2, [{(1,)}, {()}])
        r2 = LocalRule.for_graph(g2, 2, [{()}, {(1,)}])
        key1 = _canonical_key(g1, r1, {(0, 0)}, {}, {(0, 0): (0,)}, (0, 1), (0, 0))
        key2 = _canonical_key(g2, r2, {(1, 0)}, {}, {(1, 0): (0,)}, (1, 0), (0, 0))
        assert key1 == key2


class TestTailEstimate:
    def test_zero_seeds_rejected(self):
        graph, rule = disjoint_clause_instance(2)
        system = MtaSystem.build(graph, rule, Partition.singletons(graph.vertex_count))
        with pytest.raises(ValueError):
            tail_estimate(system, [0] * graph.vertex_count, [], [0, 1], 100)

    def test_satisfying_start_never_exceeds(self):
        graph, rule = disjoint_clause_instance(2)
        system = MtaSystem.build(graph, rule, Partition.singletons(graph.vertex_count))
        f0 = [0, 0] + [1] * 6
        est = tail_estimate(system, f0, range(200), [0, 1, 2], 100)
        assert est.phat[0] == 0.0

    def test_geometric_tail_small(self):
        graph, rule = disjoint_clause_instance(3)
        system = MtaSystem.build(graph, rule, Partition.singletons(graph.vertex_count))
        trials = 2000
        est = tail_estimate(system, [0] * graph.vertex_count, range(trials), range(6), 500)
        assert est.cap_exceeded == 0
        q = 1 / 8
        for n, p_hat in zip(est.n_grid, est.phat):
            p_true = 1 - (1 - q**n) ** 3
            sigma = math.sqrt(p_true * (1 - p_true) / trials)
            assert abs(p_hat - p_true) <= 3 * sigma + 1e-12

    def test_witness_sizes_collected(self):
        graph, rule = disjoint_clause_instance(2)
        from lllkit import sparse_partition, default_window_params

        n = default_window_params(graph.sym_adj)
        partition = sparse_partition(graph.sym_adj, 3 * n)
        system = MtaSystem.build(graph, rule, partition)
        est = tail_estimate(
            system, [0] * graph.vertex_count, range(50), [0, 1], 100,
            collect_witness_sizes=True, window_n=n,
        )
        assert est.witness_sizes is not None and len(est.witness_sizes) == 50
        assert est.witness_size_tail(0) <= 1.0
        assert abs(
            est.witness_size_prob(0) + est.witness_size_tail(0) - 1.0
        ) < 1e-12
