import networkx as nx
import numpy as np
import pytest

from mapcycles.cyclesearch import ProjectionGraph
from mapcycles.dual import init_dual
from mapcycles.errors import BudgetExceededError
from mapcycles.model import Factor, MarkovNetwork, energy, generate_instance
from mapcycles.oracle import (OracleBudget, brute_force_map, enumerate_simple_cycles,
                              exhaustive_best_cycle_inequality, exhaustive_best_cycle_score,
                              exhaustive_best_odd_cycle, exhaustive_cycle_score)

from conftest import random_network


def test_k4_has_seven_cycles():
    edges = [(a, b) for a in range(4) for b in range(a + 1, 4)]
    cycles = enumerate_simple_cycles(4, edges)
    assert len(cycles) == 7
    assert len(set(cycles)) == 7
    assert all(c[0] == min(c) and c[1] < c[-1] for c in cycles)


def test_tree_has_no_cycles():
    assert enumerate_simple_cycles(5, [(0, 1), (1, 2), (1, 3), (3, 4)]) == []


def test_cycle_count_matches_networkx():
    rng = np.random.default_rng(0)
    for _ in range(10):
        n = int(rng.integers(3, 9))
        edges = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < 0.5]
        g = nx.Graph(edges)
        expected = {frozenset(c) for c in nx.simple_cycles(g) if len(c) >= 3}
        ours = enumerate_simple_cycles(n, edges)
        assert len(ours) == sum(1 for c in nx.simple_cycles(g) if len(c) >= 3)
        assert {frozenset(c) for c in ours} == expected


def test_brute_force_map_example1(example1):
    x, value = brute_force_map(example1)
    assert value == 2.0
    assert x == (0, 0, 1)  # lexicographically smallest maximizer


def test_brute_force_map_frustrated_pentagon():
    assert brute_force_map(generate_instance("frustrated_cycle", 5))[1] == 4.0


def test_brute_force_agrees_with_energy(rng):
    net = random_network(rng, n_vars=6)
    x, value = brute_force_map(net)
    assert energy(net, x) == pytest.approx(value, abs=1e-12)
    for _ in range(50):
        y = tuple(int(rng.integers(k)) for k in net.cardinalities)
        assert energy(net, y) <= value + 1e-12


def test_budgets_enforced():
    net = MarkovNetwork((2,) * 21, (Factor((0,), [0.0, 1.0]),))
    with pytest.raises(BudgetExceededError):
        brute_force_map(net)
    with pytest.raises(BudgetExceededError):
        enumerate_simple_cycles(15, [])
    assert enumerate_simple_cycles(15, [], OracleBudget(max_cycle_enum_nodes=15)) == []


def test_best_odd_cycle_oracle():
    pg = ProjectionGraph.from_edges(4, [(0, 1, -2), (1, 2, 3), (0, 2, 1), (2, 3, -5), (1, 3, 4)])
    value, cyc = exhaustive_best_odd_cycle(pg)
    # 0-1-2 is odd with bottleneck 1; 1-2-3 is odd with bottleneck 3
    assert value == 3.0
    assert set(cyc) == {1, 2, 3}
    assert exhaustive_best_odd_cycle(ProjectionGraph.from_edges(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)])) == (0.0, None)


def test_cycle_scores_example1(example1):
    state = init_dual(example1)
    assert exhaustive_cycle_score(state, (0, 1, 2)) == 1.0
    assert exhaustive_best_cycle_score(state) == 1.0
    assert exhaustive_best_cycle_inequality(state) == 1.0


def test_cycle_inequality_oracle_binary_only():
    net = MarkovNetwork((3, 2, 2), (Factor((0, 1), np.zeros((3, 2))),))
    with pytest.raises(ValueError):
        exhaustive_best_cycle_inequality(init_dual(net))
