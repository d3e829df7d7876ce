"""Primal decoding beyond per-node argmax.

The dual value equals ``energy(x)`` plus the total "slack" of ``x``: for
every node, edge and cluster term, how far ``x`` falls short of that term's
maximum. :func:`certificate_search` assigns variables one at a time, bounds
the slack of each partially assigned term by maximizing over its free
variables, and backtracks whenever the bound exceeds the tolerance. With an
infinite tolerance the first leaf it reaches is a lookahead-greedy decode.
"""
from __future__ import annotations

import math
from collections import deque

import numpy as np

from .dual import DualState, node_argmax
from .model import MarkovNetwork, energy


class _Terms:
    def __init__(self, state: DualState):
        self.scopes, self.tables, self.maxes = [], [], []
        for i, nb in enumerate(state.node_b):
            self._add((i,), nb)
        for e, ij in enumerate(state.edges):
            self._add(ij, state.belief(e))
        for ci, cl in enumerate(state.clusters):
            self._add(cl.vars, state.cluster_belief(ci))
        self.of_var = [[] for _ in state.cards]
        for t, scope in enumerate(self.scopes):
            for v in scope:
                self.of_var[v].append(t)

    def _add(self, scope, table):
        self.scopes.append(scope)
        self.tables.append(table)
        self.maxes.append(float(table.max()))

    def slack(self, t, x):
        idx = tuple(slice(None) if x[v] < 0 else x[v] for v in self.scopes[t])
        return self.maxes[t] - float(np.max(self.tables[t][idx]))


def bfs_order(state: DualState) -> list[int]:
    adj = [[] for _ in state.cards]
    for i, j in sorted(state.edges):
        adj[i].append(j)
        adj[j].append(i)
    seen, order = set(), []
    for root in range(len(state.cards)):
        if root in seen:
            continue
        seen.add(root)
        queue = deque([root])
        while queue:
            v = queue.popleft()
            order.append(v)
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    queue.append(u)
    return order


def certificate_search(state: DualState, tol: float, order=None, node_limit: int = 20000):
    """Assignment whose total slack is at most ``tol``, or ``None``.

    Gives up (returns ``None``) after ``node_limit`` branch expansions.
    """
    terms = _Terms(state)
    order = bfs_order(state) if order is None else list(order)
    n = len(state.cards)
    x = [-1] * n
    slack = [0.0] * len(terms.scopes)
    budget = [node_limit]

    def descend(pos, total):
        if pos == len(order):
            return tuple(x)
        budget[0] -= 1
        if budget[0] < 0:
            return None
        i = order[pos]
        options = []
        for s in range(state.cards[i]):
            x[i] = s
            new = {t: terms.slack(t, x) for t in terms.of_var[i]}
            cost = total + sum(v - slack[t] for t, v in new.items())
            if cost <= tol:
                options.append((cost, s, new))
        x[i] = -1
        options.sort(key=lambda o: (o[0], o[1]))
        for cost, s, new in options:
            x[i] = s
            saved = {t: slack[t] for t in new}
            for t, v in new.items():
                slack[t] = v
            found = descend(pos + 1, cost)
            if found is not None:
                return found
            for t, v in saved.items():
                slack[t] = v
            if budget[0] < 0:
                break
        x[i] = -1
        return None

    return descend(0, 0.0)


def greedy_decode(state: DualState, order=None) -> tuple[int, ...]:
    return certificate_search(state, math.inf, order=order, node_limit=len(state.cards) + 1)


def icm(net: MarkovNetwork, x, max_sweeps: int = 100) -> tuple[int, ...]:
    """Iterated conditional modes: single-variable moves that strictly raise the energy."""
    x = list(x)
    touching = [[] for _ in range(net.num_vars)]
    for f in net.factors:
        for v in f.scope:
            touching[v].append(f)
    for _ in range(max_sweeps):
        changed = False
        for i in range(net.num_vars):
            local = np.zeros(net.cardinalities[i])
            for f in touching[i]:
                idx = tuple(slice(None) if v == i else x[v] for v in f.scope)
                local += f.table[idx]
            best = int(np.argmax(local))
            if local[best] > local[x[i]] + 1e-12:
                x[i] = best
                changed = True
        if not changed:
            break
    return tuple(x)


def best_decoding(net: MarkovNetwork, state: DualState, rng=None, restarts: int = 0):
    """Best of node-argmax and lookahead-greedy decodes, each polished by ICM.

    ``restarts`` extra greedy decodes use random variable orders from ``rng``.
    Returns ``(assignment, energy)``.
    """
    starts = [node_argmax(state), greedy_decode(state)]
    for _ in range(restarts):
        starts.append(greedy_decode(state, order=rng.permutation(len(state.cards))))
    best, best_val = None, -math.inf
    for x in starts:
        for cand in (x, icm(net, x)):
            val = energy(net, cand)
            if val > best_val:
                best, best_val = cand, val
    return best, best_val
