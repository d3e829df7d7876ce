"""Frustrated-cycle search on the projection graph.

Each variable contributes one node per two-block partition of its states;
adjacent variables' nodes are joined by an edge whose weight compares the
best edge belief with both endpoints on the same side of their partitions
against the best with them on different sides. A cycle with an odd number
of negative edges certifies a bound decrease equal to its smallest absolute
weight, and the best such cycle is found by binary search over thresholds
plus a spanning-tree parity check.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .clusters import VariableCycle, score_cycle
from .dual import DualState, dual_objective
from .errors import ParameterError

ZERO_TOL = 1e-12
SCORE_TOL = 1e-9


@dataclass
class ProjectionGraph:
    """Nodes are ``(variable, partition index)``; edges are ``(m, n, s_mn)`` on node indices."""

    nodes: list
    partitions: dict
    edges: list

    @classmethod
    def from_edges(cls, num_nodes, edges):
        """Generic signed weighted graph; node ``v`` is labelled ``(v, 0)``."""
        es = [(min(m, n), max(m, n), float(s)) for m, n, s in edges]
        return cls([(v, 0) for v in range(num_nodes)], {}, es)

    def weight_map(self):
        return {(m, n): s for m, n, s in self.edges}

    def signed_subgraph(self, threshold):
        """Edges with ``|s| >= threshold``, weights replaced by their signs."""
        es = [(m, n, 1.0 if s > 0 else -1.0) for m, n, s in self.edges if abs(s) >= threshold]
        return ProjectionGraph(self.nodes, self.partitions, es)

    def state_set(self, node):
        var, q = self.nodes[node]
        parts = self.partitions.get(var)
        return parts[q] if parts else frozenset((1,))

    def dump(self) -> str:
        """Edge list ``i q j r s_mn``, one edge per line."""
        lines = []
        for m, n, s in self.edges:
            (i, q), (j, r) = self.nodes[m], self.nodes[n]
            lines.append(f"{i} {q} {j} {r} {s!r}")
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class CycleCandidate:
    """Odd-signed projection cycle.

    ``weights[t]`` belongs to the edge from ``proj_cycle[t]`` to
    ``proj_cycle[t + 1]`` (wrapping); ``partitions[t]`` is the state set on
    the "in" side of node ``proj_cycle[t]``.
    """

    proj_cycle: tuple
    partitions: tuple
    weights: tuple
    var_cycle: VariableCycle | None = None

    @property
    def F(self):
        return tuple(t for t, s in enumerate(self.weights) if s < 0)

    @property
    def bound(self) -> float:
        return max(0.0, min(abs(s) for s in self.weights))

    @property
    def length(self) -> int:
        return len(self.proj_cycle)

    @property
    def variables(self):
        return tuple(v for v, _ in self.proj_cycle)


# ------------------------------------------------------------------ building


def default_partitions(cards, extra=None):
    """Singleton-versus-rest partitions; binary variables get the single set ``{1}``.

    ``extra`` maps a variable to additional state sets to register as
    partitions.
    """
    parts = {}
    for i, k in enumerate(cards):
        if k == 1:
            parts[i] = []
        elif k == 2:
            parts[i] = [frozenset((1,))]
        else:
            parts[i] = [frozenset((q,)) for q in range(k)]
    for i, sets in (extra or {}).items():
        for s in sets:
            s = frozenset(s)
            if not s or len(s) >= cards[i]:
                raise ParameterError(f"partition {set(s)} of variable {i} is trivial")
            parts[i].append(s)
    return parts


def _excl_max(b):
    """``out[x, y] = max(b[x, y'] for y' != y)``."""
    k = b.shape[1]
    if k < 2:
        return np.full_like(b, -np.inf)
    order = np.argsort(-b, axis=1, kind="stable")
    top = np.take_along_axis(b, order[:, :1], axis=1)
    second = np.take_along_axis(b, order[:, 1:2], axis=1)
    return np.where(np.arange(k)[None, :] == order[:, :1], second, top)


def singleton_weights(b: np.ndarray) -> np.ndarray:
    """``s[a, c]`` for the partitions ``{a}`` of ``x_i`` and ``{c}`` of ``x_j``.

    Uses row/column maxima with runner-ups, so the whole table costs
    ``O(k_i k_j)``.
    """
    row_excl = _excl_max(b)            # same x_i, other x_j
    col_excl = _excl_max(b.T).T        # other x_i, same x_j
    both_excl = _excl_max(row_excl.T).T  # other x_i, other x_j
    equal = np.maximum(b, both_excl)
    unequal = np.maximum(row_excl, col_excl)
    return equal - unequal


def partition_weight(b: np.ndarray, set_i, set_j) -> float:
    """Weight of one projection edge computed directly from state masks."""
    in_i = np.isin(np.arange(b.shape[0]), list(set_i))
    in_j = np.isin(np.arange(b.shape[1]), list(set_j))
    same = in_i[:, None] == in_j[None, :]
    return float(b[same].max() - b[~same].max())


def build_projection_graph(state: DualState, extra_partitions=None) -> ProjectionGraph:
    """Projection graph of the current beliefs with zero-weight edges pruned."""
    parts = default_partitions(state.cards, extra_partitions)
    nodes, first = [], {}
    for i in range(len(state.cards)):
        first[i] = len(nodes)
        nodes.extend((i, q) for q in range(len(parts[i])))
    edges = []
    for e in state.edge_order():
        i, j = state.edges[e]
        if not parts[i] or not parts[j]:
            continue
        b = state.belief(e)
        single = all(len(s) == 1 for s in parts[i] + parts[j])
        table = singleton_weights(b) if single else None
        for q, set_i in enumerate(parts[i]):
            for r, set_j in enumerate(parts[j]):
                if table is not None:
                    s = float(table[next(iter(set_i)), next(iter(set_j))])
                else:
                    s = partition_weight(b, set_i, set_j)
                if abs(s) > ZERO_TOL:
                    edges.append((first[i] + q, first[j] + r, s))
    return ProjectionGraph(nodes, parts, edges)


# ------------------------------------------------------------------ searching


def _spanning_forest(pg):
    n = len(pg.nodes)
    adj = [[] for _ in range(n)]
    for idx, (a, b, _) in enumerate(pg.edges):
        adj[a].append((b, idx))
        adj[b].append((a, idx))
    for lst in adj:
        lst.sort()
    parent = [-1] * n
    depth = [-1] * n
    sign = [0] * n
    tree = set()
    for root in range(n):
        if depth[root] >= 0:
            continue
        depth[root], sign[root] = 0, 1
        queue = deque([root])
        while queue:
            t = queue.popleft()
            for u, idx in adj[t]:
                if depth[u] < 0:
                    depth[u] = depth[t] + 1
                    parent[u] = t
                    sign[u] = sign[t] * (1 if pg.edges[idx][2] > 0 else -1)
                    tree.add(idx)
                    queue.append(u)
    return parent, depth, sign, tree


def _tree_cycle(parent, depth, m, n):
    left, right = [m], [n]
    while depth[left[-1]] > depth[right[-1]]:
        left.append(parent[left[-1]])
    while depth[right[-1]] > depth[left[-1]]:
        right.append(parent[right[-1]])
    while left[-1] != right[-1]:
        left.append(parent[left[-1]])
        right.append(parent[right[-1]])
    return left + right[-2::-1]


def odd_cycles(pg: ProjectionGraph):
    """Node-index cycles closed by every parity-violating non-tree edge, shortest first."""
    for _, _, s in pg.edges:
        if s not in (1.0, -1.0):
            raise ValueError(f"odd-cycle search needs unit signs, got {s}")
    parent, depth, sign, tree = _spanning_forest(pg)
    found = []
    for idx, (m, n, s) in enumerate(pg.edges):
        if idx in tree:
            continue
        if sign[m] != sign[n] * (1 if s > 0 else -1):
            cyc = _tree_cycle(parent, depth, m, n)
            found.append((len(cyc), idx, cyc))
    found.sort(key=lambda item: item[:2])
    return [cyc for _, _, cyc in found]


def _candidate(pg, cyc, weights) -> CycleCandidate:
    ws = tuple(weights[(min(a, b), max(a, b))] for a, b in zip(cyc, cyc[1:] + cyc[:1]))
    return CycleCandidate(tuple(pg.nodes[c] for c in cyc),
                          tuple(pg.state_set(c) for c in cyc), ws)


def find_odd_cycle(pg: ProjectionGraph) -> list[CycleCandidate]:
    """Cycles with an odd number of ``-1`` edges in a unit-signed graph.

    Builds a BFS spanning forest from the lowest-index node of each
    component, propagates signs down the tree and closes a cycle through the
    least common ancestor for each non-tree edge whose sign disagrees with
    its endpoints. Empty exactly when no odd-signed cycle exists.
    """
    weights = pg.weight_map()
    return [_candidate(pg, cyc, weights) for cyc in odd_cycles(pg)]


def best_threshold_search(pg: ProjectionGraph):
    """Largest ``R`` among the ``|s_mn|`` values whose ``|s| >= R`` subgraph has an odd cycle.

    Returns ``(R, candidates)`` with the candidates re-weighted by the
    original ``s_mn``; ``(0.0, [])`` when there is no odd-signed cycle at all.
    """
    levels = sorted({abs(s) for _, _, s in pg.edges})
    if not levels:
        return 0.0, []
    weights = pg.weight_map()

    def probe(k):
        return odd_cycles(pg.signed_subgraph(levels[k]))

    found = probe(0)
    if not found:
        return 0.0, []
    lo, hi = 0, len(levels) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        cycles = probe(mid)
        if cycles:
            lo, found = mid, cycles
        else:
            hi = mid - 1
    return levels[lo], [_candidate(pg, cyc, weights) for cyc in found]


def _split_walk(seq):
    """Break a closed walk over variables into simple cycles at repeated variables."""
    stack, pos, pieces = [], {}, []
    for v in list(seq) + [seq[0]]:
        if v in pos:
            at = pos[v]
            piece = stack[at:]
            for u in piece[1:]:
                del pos[u]
            del stack[at + 1:]
            if len(piece) >= 3:
                pieces.append(tuple(piece))
        else:
            pos[v] = len(stack)
            stack.append(v)
    return pieces


def extract_variable_cycles(candidates, state: DualState) -> list[VariableCycle]:
    """Variable cycles induced by projection cycles.

    A projection cycle that visits each variable once maps straight to its
    variable cycle. One that revisits a variable is split into simple
    sub-cycles, each kept only if it still scores positively. Output is
    deduplicated and ordered by descending bound, then length.
    """
    seen = {}
    for cand in sorted(candidates, key=lambda c: (-c.bound, c.length)):
        seq = cand.variables
        if len(set(seq)) == len(seq):
            pieces = [seq]
        else:
            pieces = [p for p in _split_walk(seq) if score_cycle(state, p) > SCORE_TOL]
        for p in pieces:
            vc = VariableCycle(p, bound=cand.bound).canonical()
            if vc.vars not in seen:
                seen[vc.vars] = vc
    return sorted(seen.values(), key=lambda c: (-c.bound, len(c), c.vars))


def candidate_pool(state: DualState, prune_factor: float = 1.0, extra_partitions=None,
                   projection=None):
    """Threshold ``R`` and all candidates from the ``R`` and ``R / c`` subgraphs.

    The pool at ``c`` always contains the pool at ``c = 1``.
    """
    if prune_factor < 1:
        raise ParameterError(f"prune factor must be >= 1, got {prune_factor}")
    pg = projection if projection is not None else build_projection_graph(state, extra_partitions)
    R, cands = best_threshold_search(pg)
    if R <= 0:
        return 0.0, []
    if prune_factor > 1:
        weights = pg.weight_map()
        pruned = odd_cycles(pg.signed_subgraph(R / prune_factor))
        cands = cands + [_candidate(pg, cyc, weights) for cyc in pruned]
    return R, cands


def search_cycles(state: DualState, max_cycles: int | None = None, prune_factor: float = 1.0,
                  extra_partitions=None, projection=None) -> list[VariableCycle]:
    """Frustrated variable cycles, best bound first; empty when nothing is frustrated."""
    _, cands = candidate_pool(state, prune_factor, extra_partitions, projection)
    cycles = extract_variable_cycles(cands, state)
    return cycles if max_cycles is None else cycles[:max_cycles]


# ------------------------------------------------------- cycle-inequality duals


def _cycle_weights(state: DualState, cand: CycleCandidate):
    ws = []
    nodes = cand.proj_cycle
    for t in range(len(nodes)):
        u = t + 1 if t + 1 < len(nodes) else 0
        (i, _), (j, _) = nodes[t], nodes[u]
        b = state.oriented_belief(i, j)
        ws.append(partition_weight(b, cand.partitions[t], cand.partitions[u]))
    return ws


def bound_d_cfp(state: DualState, cand: CycleCandidate, F=None) -> float:
    """Bound decrease of one descent step on the cycle inequality ``(C, F, pi)``.

    ``F`` holds positions into the candidate's edges; by default the edges
    that were negative when the candidate was found.
    """
    F = set(cand.F if F is None else F)
    s = _cycle_weights(state, cand)
    return max(0.0, min(-w if t in F else w for t, w in enumerate(s)))


def lambda_step(state: DualState, cand: CycleCandidate, F=None):
    """Descent step for the cycle-inequality multiplier, evaluated without mutating ``state``.

    Returns ``(lambda, new_dual_value)``; the new value comes from the
    modified edge terms directly.
    """
    F = set(cand.F if F is None else F)
    lam = bound_d_cfp(state, cand, F)
    nodes = cand.proj_cycle
    bumped = {}
    for t in range(len(nodes)):
        u = t + 1 if t + 1 < len(nodes) else 0
        (i, _), (j, _) = nodes[t], nodes[u]
        key = (min(i, j), max(i, j))
        if key not in bumped:
            bumped[key] = state.belief(state.edge_index[key]).copy()
        set_i, set_j = cand.partitions[t], cand.partitions[u]
        if i > j:
            set_i, set_j = set_j, set_i
        b = bumped[key]
        in_i = np.isin(np.arange(b.shape[0]), list(set_i))
        in_j = np.isin(np.arange(b.shape[1]), list(set_j))
        same = in_i[:, None] == in_j[None, :]
        b += lam * (same if t in F else ~same)
    L = dual_objective(state)
    old = sum(float(state.belief(state.edge_index[k]).max()) for k in bumped)
    new = sum(float(b.max()) for b in bumped.values())
    return lam, L - old + new - lam
