"""Brute-force ground truth for small instances.

Everything here enumerates; nothing shares code paths with the solver
beyond reading beliefs. Inputs above the budget are refused.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .errors import BudgetExceededError
from .model import MarkovNetwork


@dataclass(frozen=True)
class OracleBudget:
    max_joint_states: int = 2 ** 20
    max_cycle_enum_nodes: int = 14


DEFAULT_BUDGET = OracleBudget()


def brute_force_map(net: MarkovNetwork, budget: OracleBudget = DEFAULT_BUDGET):
    """Exact MAP by scoring every joint state; ties go to the lexicographically smallest."""
    size = math.prod(net.cardinalities)
    if size > budget.max_joint_states:
        raise BudgetExceededError(f"{size} joint states exceed budget {budget.max_joint_states}")
    n = net.num_vars
    scores = np.zeros(net.cardinalities)
    for f in net.factors:
        shape = [1] * n
        for v, k in zip(f.scope, f.table.shape):
            shape[v] = k
        scores = scores + f.table.reshape(shape)
    flat = int(np.argmax(scores))
    x = tuple(int(v) for v in np.unravel_index(flat, net.cardinalities))
    return x, float(scores.ravel()[flat])


def enumerate_simple_cycles(num_nodes: int, edges, budget: OracleBudget = DEFAULT_BUDGET):
    """Every simple cycle (length >= 3) of an undirected graph, once each.

    Cycles are node tuples starting at their smallest node, oriented so the
    second node is smaller than the last.
    """
    if num_nodes > budget.max_cycle_enum_nodes:
        raise BudgetExceededError(
            f"{num_nodes} nodes exceed cycle enumeration budget {budget.max_cycle_enum_nodes}")
    adj = [set() for _ in range(num_nodes)]
    for a, b in edges:
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    cycles = []
    for start in range(num_nodes):
        path = [start]
        on_path = {start}

        def extend(u):
            for w in sorted(adj[u]):
                if w == start and len(path) >= 3 and path[1] < path[-1]:
                    cycles.append(tuple(path))
                elif w > start and w not in on_path:
                    path.append(w)
                    on_path.add(w)
                    extend(w)
                    path.pop()
                    on_path.remove(w)

        extend(start)
    return cycles


def exhaustive_best_odd_cycle(pg, budget: OracleBudget = DEFAULT_BUDGET):
    """Max over odd-signed simple cycles of the smallest ``|s_mn|``.

    Returns ``(value, cycle)``; ``(0.0, None)`` when no odd-signed cycle exists.
    """
    weights = {}
    for m, n, s in pg.edges:
        weights[(min(m, n), max(m, n))] = s
    best, arg = 0.0, None
    for cyc in enumerate_simple_cycles(len(pg.nodes), weights.keys(), budget):
        ws = [weights[(min(a, b), max(a, b))] for a, b in zip(cyc, cyc[1:] + cyc[:1])]
        negatives = sum(1 for s in ws if s < 0)
        if negatives % 2 == 1:
            value = min(abs(s) for s in ws)
            if arg is None or value > best:
                best, arg = value, cyc
    return best, arg


def exhaustive_cycle_score(state, cycle, budget: OracleBudget = DEFAULT_BUDGET) -> float:
    """Bound criterion of a variable cycle by enumerating all of its joint states."""
    vs = tuple(cycle.vars if hasattr(cycle, "vars") else cycle)
    size = math.prod(state.cards[v] for v in vs)
    if size > budget.max_joint_states:
        raise BudgetExceededError(f"{size} cycle states exceed budget {budget.max_joint_states}")
    n = len(vs)
    tables = []
    for t in range(n):
        u, v = vs[t], vs[(t + 1) % n]
        if state.has_edge(u, v):
            tables.append(state.oriented_belief(u, v))
        else:
            tables.append(np.zeros((state.cards[u], state.cards[v])))
    best = -math.inf
    for x in product(*(range(state.cards[v]) for v in vs)):
        total = sum(float(tables[t][x[t], x[(t + 1) % n]]) for t in range(n))
        best = max(best, total)
    return sum(float(t.max()) for t in tables) - best


def variable_cycles(state, budget: OracleBudget = DEFAULT_BUDGET):
    """All simple cycles of the state's Markov graph."""
    return enumerate_simple_cycles(len(state.cards), state.edges, budget)


def exhaustive_best_cycle_score(state, budget: OracleBudget = DEFAULT_BUDGET) -> float:
    """``max_C d(C)`` over every simple cycle of the Markov graph (0 when acyclic)."""
    return max((exhaustive_cycle_score(state, c, budget) for c in variable_cycles(state, budget)),
               default=0.0)


def exhaustive_best_cycle_inequality(state, budget: OracleBudget = DEFAULT_BUDGET) -> float:
    """``max_{C, F odd} d(C, F)`` for a binary model, enumerating every cycle and every ``F``."""
    if any(k != 2 for k in state.cards):
        raise ValueError("cycle-inequality enumeration is for binary models")
    best = 0.0
    for cyc in variable_cycles(state, budget):
        s = []
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            bel = state.oriented_belief(a, b)
            s.append(max(bel[0, 0], bel[1, 1]) - max(bel[0, 1], bel[1, 0]))
        n = len(s)
        for size in range(1, n + 1, 2):
            for F in combinations(range(n), size):
                w = [-s[t] if t in F else s[t] for t in range(n)]
                best = max(best, max(0.0, min(w)))
    return float(best)
