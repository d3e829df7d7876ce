"""Cycle scoring and cluster pursuit over triplet clusters."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dual import PURSUIT, Cluster, DualState
from .errors import AlreadyRegisteredError, InvalidCycleError, PreconditionError

__all__ = ["Cluster", "VariableCycle", "score_cycle", "enumerate_triangles",
           "triangulate_cycle", "add_cluster", "cluster_descent_step"]


@dataclass(frozen=True)
class VariableCycle:
    """Cyclic sequence of distinct variables; ``bound`` is search metadata only."""

    vars: tuple[int, ...]
    bound: float = field(default=0.0, compare=False)

    def __post_init__(self):
        vs = tuple(int(v) for v in self.vars)
        if len(vs) < 3:
            raise InvalidCycleError(f"a cycle needs at least 3 variables, got {vs}")
        if len(set(vs)) != len(vs):
            raise InvalidCycleError(f"repeated variable in cycle {vs}")
        object.__setattr__(self, "vars", vs)

    def __len__(self):
        return len(self.vars)

    @property
    def edges(self):
        vs = self.vars
        return [(vs[t], vs[(t + 1) % len(vs)]) for t in range(len(vs))]

    def canonical(self) -> "VariableCycle":
        """Rotate the smallest variable first, then walk toward its smaller neighbour."""
        vs = self.vars
        s = vs.index(min(vs))
        fwd = vs[s:] + vs[:s]
        bwd = (fwd[0],) + fwd[1:][::-1]
        return VariableCycle(min(fwd, bwd, key=lambda c: c[1]), self.bound)


def _as_cycle(c) -> VariableCycle:
    return c if isinstance(c, VariableCycle) else VariableCycle(tuple(c))


def _belief_or_zero(state: DualState, u, v):
    if state.has_edge(u, v):
        return state.oriented_belief(u, v)
    return np.zeros((state.cards[u], state.cards[v]))


def score_cycle(state: DualState, cycle) -> float:
    """Bound decrease ``d(C)`` from enforcing consistency on ``cycle``.

    Sum of the edge belief maxima minus the best joint assignment of the
    cycle, the latter by a max-product chain with the first variable held
    fixed (vectorized over its states).
    """
    cycle = _as_cycle(cycle)
    tables = [_belief_or_zero(state, u, v) for u, v in cycle.edges]
    independent = sum(float(t.max()) for t in tables)
    chain = tables[0]
    for t in tables[1:-1]:
        chain = np.max(chain[:, :, None] + t[None, :, :], axis=1)
    joint = float(np.max(chain + tables[-1].T))
    return independent - joint


def enumerate_triangles(graph) -> list[VariableCycle]:
    """All 3-cliques of ``graph.markov_edges``, each once with ascending variables."""
    adj: dict[int, set] = {}
    for i, j in graph.markov_edges:
        adj.setdefault(i, set()).add(j)
        adj.setdefault(j, set()).add(i)
    out = []
    for i in sorted(adj):
        for j in sorted(v for v in adj[i] if v > i):
            for k in sorted(v for v in adj[i] & adj[j] if v > j):
                out.append(VariableCycle((i, j, k)))
    return out


def triangulate_cycle(cycle) -> list[Cluster]:
    """Fan triangulation from the first variable: ``(v0, v_t, v_t+1)``."""
    vs = _as_cycle(cycle).vars
    return [Cluster((vs[0], vs[t], vs[t + 1]), origin=PURSUIT) for t in range(1, len(vs) - 1)]


def add_cluster(state: DualState, cluster: Cluster) -> DualState:
    """Register ``cluster`` with zero messages; the dual value is unchanged."""
    if cluster.key in state.cluster_index:
        raise AlreadyRegisteredError(f"cluster {cluster.vars} already registered")
    state.register_cluster(cluster)
    return state


def _slot(cl: Cluster, u, v):
    return cl.covered_edges.index((min(u, v), max(u, v)))


def _get_msg(state, ci, u, v):
    m = state.cluster_msgs[ci][_slot(state.clusters[ci], u, v)]
    return m if u < v else m.T


def _set_msg(state, ci, u, v, new):
    cl = state.clusters[ci]
    slot = _slot(cl, u, v)
    new = new if u < v else new.T
    e = state.edge_index[(min(u, v), max(u, v))]
    state.cl_sum[e] = state.cl_sum[e] + (new - state.cluster_msgs[ci][slot])
    state.cluster_msgs[ci][slot] = np.array(new)


def cluster_descent_step(state: DualState, cycle) -> DualState:
    """Exact block minimization over all messages of the cycle's fan triplets.

    The triplets ``t = (v0, v_t, v_t+1)`` form a chain whose separators are
    the chords ``(v0, v_t+1)``. Max-product along the chain gives the
    max-marginals; messages are then set so that every cycle edge holds
    ``1/n`` of its max-marginal, every chord belief becomes zero, and every
    triplet term is non-positive with maximum zero. The block's share of the
    dual drops to the joint maximum, so starting from zero messages and
    zero chord beliefs the decrease is exactly ``score_cycle``.
    """
    cycle = _as_cycle(cycle)
    vs = cycle.vars
    n = len(vs)
    m = n - 2
    cis = [None]
    for cl in triangulate_cycle(cycle):
        ci = state.cluster_index.get(cl.key)
        if ci is None:
            raise PreconditionError(f"triplet {cl.vars} of cycle {vs} is not registered")
        cis.append(ci)

    def chain_msgs(u, v):
        # triplets of this chain containing edge (u, v)
        return [t for t in range(1, m + 1) if {u, v} <= {vs[0], vs[t], vs[t + 1]}]

    base = {}
    pairs = [(vs[t], vs[t + 1]) for t in range(n - 1)] + [(vs[0], vs[t]) for t in range(2, n)]
    for u, v in pairs:
        b = state.oriented_belief(u, v)
        for t in chain_msgs(u, v):
            b = b - _get_msg(state, cis[t], u, v)
        base[(u, v)] = b

    v0 = vs[0]
    phi = [None]
    for t in range(1, m + 1):
        cl = state.clusters[cis[t]]
        perm = [cl.vars.index(x) for x in (v0, vs[t], vs[t + 1])]
        p = np.transpose(cl.potential, perm) + base[(vs[t], vs[t + 1])][None, :, :]
        p = p + base[(v0, vs[t + 1])][:, None, :]
        if t == 1:
            p = p + base[(v0, vs[1])][:, :, None]
        phi.append(p)

    f = [np.zeros((state.cards[v0], state.cards[vs[1]]))]
    for t in range(1, m + 1):
        f.append(np.max(phi[t] + f[t - 1][:, :, None], axis=1))
    g = [None] * (m + 2)
    g[m + 1] = np.zeros((state.cards[v0], state.cards[vs[m + 1]]))
    for t in range(m, 0, -1):
        g[t] = np.max(phi[t] + g[t + 1][:, None, :], axis=2)

    new = {}
    for t in range(1, m + 1):
        mu = phi[t] + f[t - 1][:, :, None] + g[t + 1][:, None, :]
        a, b = vs[t], vs[t + 1]
        new[(t, a, b)] = mu.max(axis=0) / n - base[(a, b)]
        if t == 1:
            new[(t, v0, a)] = mu.max(axis=2) / n - base[(v0, a)]
        else:
            new[(t, v0, a)] = (t / n) * (f[t - 1] + g[t]) - f[t - 1]
        if t == m:
            new[(t, v0, b)] = mu.max(axis=1) / n - base[(v0, b)]
        else:
            share = 1.0 - (t + 1) / n
            new[(t, v0, b)] = share * (f[t] + g[t + 1]) - base[(v0, b)] - g[t + 1]
    for (t, u, v), msg in new.items():
        _set_msg(state, cis[t], u, v, msg)
    if state.debug:
        state.check()
    return state
