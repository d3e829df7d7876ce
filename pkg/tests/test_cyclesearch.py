import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapcycles.clusters import VariableCycle, score_cycle
from mapcycles.cyclesearch import (CycleCandidate, ProjectionGraph, _split_walk, best_threshold_search,
                                   bound_d_cfp, build_projection_graph, candidate_pool,
                                   default_partitions, extract_variable_cycles, find_odd_cycle,
                                   lambda_step, partition_weight, search_cycles, singleton_weights)
from mapcycles.dual import init_dual, mplp_pass
from mapcycles.errors import ParameterError
from mapcycles.model import Factor, MarkovNetwork, generate_instance
from mapcycles.oracle import exhaustive_best_odd_cycle

from conftest import random_cycle_network, random_network, random_signed_graph


def _has_odd_cycle(pg):
    return exhaustive_best_odd_cycle(pg.signed_subgraph(0.0))[1] is not None


# ------------------------------------------------------------------ building


def test_example1_projection_graph(example1):
    pg = build_projection_graph(init_dual(example1))
    assert pg.nodes == [(0, 0), (1, 0), (2, 0)]
    assert sorted(pg.edges) == [(0, 1, -1.0), (0, 2, -1.0), (1, 2, -1.0)]
    assert pg.state_set(0) == frozenset({1})


def test_ternary_edge_projection():
    rng = np.random.default_rng(0)
    net = MarkovNetwork((3, 3), (Factor((0, 1), rng.normal(size=(3, 3))),))
    pg = build_projection_graph(init_dual(net))
    assert len(pg.nodes) == 6
    assert len(pg.edges) <= 9
    assert all(0 <= m < 3 <= n < 6 for m, n, _ in pg.edges)


def test_projection_counts_without_pruning():
    rng = np.random.default_rng(1)
    net = random_network(rng, n_vars=6, triads=False)
    state = init_dual(net)
    parts = default_partitions(net.cardinalities)
    pg = build_projection_graph(state)
    assert len(pg.nodes) == sum(len(parts[i]) for i in range(6))
    full = sum(len(parts[i]) * len(parts[j]) for i, j in state.edges)
    assert len(pg.edges) == full  # continuous random tables leave no zero weights


def test_zero_weight_edges_pruned():
    net = MarkovNetwork((2, 2), (Factor((0, 1), np.zeros((2, 2))),))
    assert build_projection_graph(init_dual(net)).edges == []


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_fast_singleton_weights_match_masks(seed):
    rng = np.random.default_rng(seed)
    ki, kj = (int(v) for v in rng.integers(2, 6, size=2))
    b = rng.integers(-3, 4, size=(ki, kj)).astype(float)  # ties on purpose
    table = singleton_weights(b)
    for a in range(ki):
        for c in range(kj):
            assert table[a, c] == partition_weight(b, {a}, {c})


def test_extra_partitions():
    parts = default_partitions((2, 4), extra={1: [{0, 1}]})
    assert parts[1][-1] == frozenset({0, 1})
    with pytest.raises(ParameterError):
        default_partitions((2, 3), extra={1: [{0, 1, 2}]})
    rng = np.random.default_rng(2)
    net = MarkovNetwork((2, 4), (Factor((0, 1), rng.normal(size=(2, 4))),))
    pg = build_projection_graph(init_dual(net), extra_partitions={1: [{0, 1}]})
    assert len(pg.nodes) == 1 + 5


def test_dump_format(example1):
    text = build_projection_graph(init_dual(example1)).dump()
    assert text.splitlines() == ["0 0 1 0 -1.0", "0 0 2 0 -1.0", "1 0 2 0 -1.0"]


# ------------------------------------------------------------------ odd cycles


def test_odd_triangle_found():
    pg = ProjectionGraph.from_edges(3, [(0, 1, -1), (1, 2, 1), (0, 2, 1)])
    found = find_odd_cycle(pg)
    assert len(found) == 1
    assert sorted(found[0].proj_cycle) == [(0, 0), (1, 0), (2, 0)]
    assert len(found[0].F) == 1
    assert found[0].weights[found[0].F[0]] == -1


def test_even_square_has_no_odd_cycle():
    pg = ProjectionGraph.from_edges(4, [(0, 1, -1), (1, 2, -1), (2, 3, 1), (0, 3, 1)])
    assert find_odd_cycle(pg) == []


def test_find_odd_cycle_rejects_non_unit_signs():
    with pytest.raises(ValueError):
        find_odd_cycle(ProjectionGraph.from_edges(3, [(0, 1, -2), (1, 2, 1), (0, 2, 1)]))


def test_find_odd_cycle_matches_existence():
    for seed in range(100):
        pg = random_signed_graph(np.random.default_rng(seed)).signed_subgraph(0.0)
        found = find_odd_cycle(pg)
        assert bool(found) == _has_odd_cycle(pg), seed
        for cand in found:
            assert len(cand.F) % 2 == 1
            assert len(set(cand.proj_cycle)) == cand.length >= 3


def test_cycle_length_bounded_by_tree_depth():
    # path 0-1-...-9 closed by an odd edge: BFS depth bounds the LCA cycle
    edges = [(i, i + 1, 1) for i in range(9)] + [(0, 9, -1)]
    found = find_odd_cycle(ProjectionGraph.from_edges(10, edges))
    assert [c.length for c in found] == [10]
    assert found[0].length <= 2 * 5 + 1


@pytest.mark.parametrize("weights, expected", [
    ((-3.0, -2.0, -1.0), 1.0),
    ((-3.0, 2.0, 1.0), 1.0),
    ((-3.0, 2.0, 5.0), 2.0),
    ((-3.0, -2.0, 5.0), 0.0),
])
def test_threshold_search_triangle(weights, expected):
    pg = ProjectionGraph.from_edges(3, [(0, 1, weights[0]), (1, 2, weights[1]), (0, 2, weights[2])])
    R, cands = best_threshold_search(pg)
    assert R == expected
    assert bool(cands) == (expected > 0)


def test_threshold_search_picks_stronger_cycle():
    # weak odd triangle 0-1-2 and strong odd triangle 3-4-5 joined by a bridge
    edges = [(0, 1, -0.5), (1, 2, 1), (0, 2, 1), (2, 3, 9),
             (3, 4, -4), (4, 5, 3), (3, 5, 5)]
    R, cands = best_threshold_search(ProjectionGraph.from_edges(6, edges))
    assert R == 3.0
    assert sorted(v for v, _ in cands[0].proj_cycle) == [3, 4, 5]
    assert cands[0].bound == 3.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_threshold_search_matches_exhaustive(seed):
    pg = random_signed_graph(np.random.default_rng(seed), max_nodes=9)
    R, cands = best_threshold_search(pg)
    value, _ = exhaustive_best_odd_cycle(pg)
    assert R == value
    if cands:
        assert max(c.bound for c in cands) == R


# ------------------------------------------------------------ cycle extraction


def test_split_walk():
    assert _split_walk((0, 1, 2)) == [(0, 1, 2)]
    assert _split_walk((0, 1, 2, 0, 3, 4)) == [(0, 1, 2), (0, 3, 4)]
    assert _split_walk((0, 1, 0, 2, 3)) == [(0, 2, 3)]


def test_search_cycles_example1(example1):
    cycles = search_cycles(init_dual(example1))
    assert cycles == [VariableCycle((0, 1, 2))]
    assert cycles[0].bound == 1.0


def test_search_cycles_frustrated_pentagon():
    state = init_dual(generate_instance("frustrated_cycle", 5))
    assert search_cycles(state) == [VariableCycle((0, 1, 2, 3, 4))]


def test_search_cycles_empty_on_tree():
    net = MarkovNetwork((2, 2, 2), (Factor((0, 1), [[0, 1], [1, 0]]), Factor((1, 2), [[0, 1], [1, 0]])))
    assert search_cycles(init_dual(net)) == []


def test_repeated_variable_walks_are_split():
    # with three states, odd projection cycles can pass through a variable twice
    rng = np.random.default_rng(5)
    repeated = 0
    for _ in range(40):
        state = init_dual(random_cycle_network(rng, 4, max_k=3, scale=2.0))
        mplp_pass(state)
        pool = candidate_pool(state, prune_factor=4.0)[1]
        repeated += sum(1 for c in pool if len(set(c.variables)) < c.length)
        for cyc in extract_variable_cycles(pool, state):
            assert len(set(cyc.vars)) == len(cyc.vars)
            assert score_cycle(state, cyc) > 1e-9
    assert repeated > 0


def test_extracted_cycles_are_sorted_and_unique(rng):
    state = init_dual(generate_instance("complete_spin_glass", 7, seed=3))
    cycles = search_cycles(state, prune_factor=4.0)
    keys = [c.vars for c in cycles]
    assert len(keys) == len(set(keys))
    bounds = [c.bound for c in cycles]
    assert bounds == sorted(bounds, reverse=True)
    assert search_cycles(state, max_cycles=1, prune_factor=4.0) == cycles[:1]


def test_prune_factor_pool_superset():
    for seed in range(10):
        state = init_dual(generate_instance("complete_spin_glass", 7, field=0.2, seed=seed))
        mplp_pass(state)
        R1, small = candidate_pool(state, 1.0)
        R4, large = candidate_pool(state, 4.0)
        assert R1 == R4
        assert {c.proj_cycle for c in small} <= {c.proj_cycle for c in large}


def test_prune_factor_below_one_rejected(example1):
    with pytest.raises(ParameterError):
        candidate_pool(init_dual(example1), 0.5)


# ------------------------------------------------------- cycle inequalities


def _example1_candidate(state):
    return best_threshold_search(build_projection_graph(state))[1][0]


def test_bound_d_cfp_example1(example1):
    state = init_dual(example1)
    cand = _example1_candidate(state)
    assert isinstance(cand, CycleCandidate)
    assert len(cand.F) == 3
    assert bound_d_cfp(state, cand) == 1.0
    assert bound_d_cfp(state, cand, F=range(3)) == 1.0
    assert bound_d_cfp(state, cand, F=()) == 0.0


def test_lambda_step_example1(example1):
    state = init_dual(example1)
    lam, value = lambda_step(state, _example1_candidate(state))
    assert lam == 1.0
    assert value == pytest.approx(2.0, abs=1e-12)


def test_bound_d_cfp_never_exceeds_score():
    for seed in range(30):
        rng = np.random.default_rng(seed)
        state = init_dual(random_cycle_network(rng, int(rng.integers(3, 7)), max_k=3))
        mplp_pass(state)
        for cand in best_threshold_search(build_projection_graph(state))[1]:
            if len(set(cand.variables)) == cand.length:
                assert bound_d_cfp(state, cand) <= score_cycle(state, cand.variables) + 1e-9
