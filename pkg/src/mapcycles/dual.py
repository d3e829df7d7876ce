"""Dual decomposition state and MPLP block coordinate descent.

The dual has one subproblem per variable, per Markov edge and per triplet
cluster. Messages ``delta_{ij->i}`` move mass between edges and nodes,
``delta_{c->ij}`` between clusters and edges. Node beliefs and the per-edge
sum of cluster messages are cached; :meth:`DualState.check` recomputes them
from the raw messages.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import AlreadyRegisteredError, UnsupportedArityError
from .model import MarkovNetwork, energy

NATIVE = "native_factor"
PURSUIT = "pursuit"


@dataclass
class Cluster:
    """Triplet cluster over ``vars`` (ascending) with a log-potential table."""

    vars: tuple[int, int, int]
    potential: np.ndarray = None
    origin: str = PURSUIT
    cards: tuple[int, int, int] = field(default=None, repr=False)

    def __post_init__(self):
        order = sorted(range(3), key=lambda a: self.vars[a])
        self.vars = tuple(int(self.vars[a]) for a in order)
        if len(set(self.vars)) != 3:
            raise ValueError(f"cluster needs 3 distinct variables, got {self.vars}")
        if self.potential is not None:
            self.potential = np.transpose(np.asarray(self.potential, dtype=float), order)
            self.cards = self.potential.shape
        elif self.cards is not None:
            self.cards = tuple(self.cards[a] for a in order)

    @property
    def covered_edges(self):
        a, b, c = self.vars
        return ((a, b), (a, c), (b, c))

    @property
    def key(self):
        return frozenset(self.vars)


class DualState:
    """Messages of the pairwise-plus-triplet dual for one network.

    Edges are stored with ``i < j``; ``to_i[e]`` is ``delta_{ij->i}`` and
    ``to_j[e]`` is ``delta_{ij->j}``. Cluster messages are stored in the
    order of :attr:`Cluster.covered_edges`, each table indexed by the two
    edge endpoints in ascending order.
    """

    def __init__(self, net: MarkovNetwork, debug: bool | None = None):
        self.net = net
        self.cards = net.cardinalities
        self.debug = bool(os.environ.get("MAPCYCLES_DEBUG")) if debug is None else debug
        self.constant = 0.0
        self.unary = [np.zeros(k) for k in self.cards]
        self.edges: list[tuple[int, int]] = []
        self.edge_index: dict[tuple[int, int], int] = {}
        self.theta_e: list[np.ndarray] = []
        self.to_i: list[np.ndarray] = []
        self.to_j: list[np.ndarray] = []
        self.cl_sum: list[np.ndarray] = []
        self.node_b: list[np.ndarray] = []
        self.incident: list[list[int]] = [[] for _ in self.cards]
        self.clusters: list[Cluster] = []
        self.cluster_msgs: list[list[np.ndarray]] = []
        self.cluster_index: dict[frozenset, int] = {}
        self.edge_clusters: list[list[int]] = []
        self._order = None

    # -- structure ---------------------------------------------------------

    @property
    def markov_edges(self):
        return set(self.edges)

    def has_edge(self, i, j) -> bool:
        return (min(i, j), max(i, j)) in self.edge_index

    def add_edge(self, i, j, theta=None) -> int:
        """Add edge ``{i, j}`` with zero messages; returns its id (existing id if present)."""
        key = (min(i, j), max(i, j))
        if key in self.edge_index:
            return self.edge_index[key]
        a, b = key
        e = len(self.edges)
        self.edges.append(key)
        self.edge_index[key] = e
        ka, kb = self.cards[a], self.cards[b]
        self.theta_e.append(np.zeros((ka, kb)) if theta is None else np.array(theta, dtype=float))
        self.to_i.append(np.zeros(ka))
        self.to_j.append(np.zeros(kb))
        self.cl_sum.append(np.zeros((ka, kb)))
        self.edge_clusters.append([])
        self.incident[a].append(e)
        self.incident[b].append(e)
        self._order = None
        return e

    def register_cluster(self, cluster: Cluster) -> int:
        """Register ``cluster`` with zero messages, adding any missing edges."""
        if cluster.key in self.cluster_index:
            raise AlreadyRegisteredError(f"cluster {cluster.vars} already registered")
        a, b, c = cluster.vars
        cluster.cards = (self.cards[a], self.cards[b], self.cards[c])
        if cluster.potential is None:
            cluster.potential = np.zeros(cluster.cards)
        ci = len(self.clusters)
        self.clusters.append(cluster)
        self.cluster_index[cluster.key] = ci
        msgs = []
        for u, v in cluster.covered_edges:
            e = self.add_edge(u, v)
            self.edge_clusters[e].append(ci)
            msgs.append(np.zeros((self.cards[u], self.cards[v])))
        self.cluster_msgs.append(msgs)
        return ci

    def edge_order(self):
        if self._order is None:
            self._order = sorted(range(len(self.edges)), key=lambda e: self.edges[e])
        return self._order

    # -- beliefs -----------------------------------------------------------

    def belief(self, e: int) -> np.ndarray:
        return self.theta_e[e] + self.cl_sum[e] - self.to_i[e][:, None] - self.to_j[e][None, :]

    def oriented_belief(self, u, v) -> np.ndarray:
        """Edge belief indexed ``[x_u, x_v]``."""
        b = self.belief(self.edge_index[(min(u, v), max(u, v))])
        return b if u < v else b.T

    def cluster_belief(self, ci: int) -> np.ndarray:
        cl = self.clusters[ci]
        m_ab, m_ac, m_bc = self.cluster_msgs[ci]
        return cl.potential - m_ab[:, :, None] - m_ac[:, None, :] - m_bc[None, :, :]

    def check(self, atol: float = 1e-10):
        """Compare cached beliefs against a from-scratch recomputation."""
        nodes, edge_cl = recompute_caches(self)
        for i, nb in enumerate(nodes):
            if not np.allclose(nb, self.node_b[i], rtol=0, atol=atol):
                raise AssertionError(f"node belief cache of {i} drifted")
        for e, s in enumerate(edge_cl):
            if not np.allclose(s, self.cl_sum[e], rtol=0, atol=atol):
                raise AssertionError(f"cluster message cache of edge {self.edges[e]} drifted")


def recompute_caches(state: DualState):
    """Node beliefs and per-edge cluster sums computed directly from messages."""
    nodes = [u.copy() for u in state.unary]
    for e, (i, j) in enumerate(state.edges):
        nodes[i] = nodes[i] + state.to_i[e]
        nodes[j] = nodes[j] + state.to_j[e]
    edge_cl = [np.zeros_like(t) for t in state.theta_e]
    for ci, cl in enumerate(state.clusters):
        for (u, v), m in zip(cl.covered_edges, state.cluster_msgs[ci]):
            e = state.edge_index[(u, v)]
            edge_cl[e] = edge_cl[e] + m
    return nodes, edge_cl


def init_dual(net: MarkovNetwork, debug: bool | None = None) -> DualState:
    """Zero-message dual; arity-3 factors become native clusters."""
    state = DualState(net, debug=debug)
    triads: dict[tuple, np.ndarray] = {}
    pair_tables: dict[tuple, np.ndarray] = {}
    for f in net.factors:
        if f.arity == 0:
            state.constant += float(f.table)
        elif f.arity == 1:
            state.unary[f.scope[0]] = state.unary[f.scope[0]] + f.table
        elif f.arity == 2:
            pair_tables[f.scope] = pair_tables.get(f.scope, 0.0) + f.table
        elif f.arity == 3:
            triads[f.scope] = triads.get(f.scope, 0.0) + f.table
        else:
            raise UnsupportedArityError(
                f"factor over {f.scope} has arity {f.arity}; the solver supports arity <= 3")
    for (i, j) in sorted(net.markov_edges):
        state.add_edge(i, j, pair_tables.get((i, j)))
    for scope in sorted(triads):
        state.register_cluster(Cluster(scope, triads[scope], origin=NATIVE))
    state.node_b = [u.copy() for u in state.unary]
    return state


def node_belief(state: DualState, i: int) -> np.ndarray:
    return state.node_b[i].copy()


def edge_belief(state: DualState, ij) -> np.ndarray:
    """Belief ``b_ij`` indexed by ``[x_i, x_j]`` in the order given."""
    i, j = ij
    if not state.has_edge(i, j):
        raise KeyError(f"no edge {ij}")
    return state.oriented_belief(i, j).copy()


def dual_objective(state: DualState) -> float:
    total = state.constant
    total += sum(float(nb.max()) for nb in state.node_b)
    total += sum(float(state.belief(e).max()) for e in range(len(state.edges)))
    total += sum(float(state.cluster_belief(ci).max()) for ci in range(len(state.clusters)))
    return total


def update_edge(state: DualState, e: int):
    """Jointly re-optimize ``delta_{ij->i}`` and ``delta_{ij->j}``."""
    i, j = state.edges[e]
    rest_i = state.node_b[i] - state.to_i[e]
    rest_j = state.node_b[j] - state.to_j[e]
    theta = state.theta_e[e] + state.cl_sum[e]
    new_i = 0.5 * (np.max(theta + rest_j[None, :], axis=1) - rest_i)
    new_j = 0.5 * (np.max(theta + rest_i[:, None], axis=0) - rest_j)
    state.to_i[e] = new_i
    state.to_j[e] = new_j
    state.node_b[i] = rest_i + new_i
    state.node_b[j] = rest_j + new_j


def update_cluster(state: DualState, ci: int):
    """Jointly re-optimize the three cluster-to-edge messages of cluster ``ci``."""
    cl = state.clusters[ci]
    msgs = state.cluster_msgs[ci]
    eids = [state.edge_index[uv] for uv in cl.covered_edges]
    lam = [state.belief(e) - m for e, m in zip(eids, msgs)]
    total = cl.potential + lam[0][:, :, None] + lam[1][:, None, :] + lam[2][None, :, :]
    maxes = (total.max(axis=2), total.max(axis=1), total.max(axis=0))
    for slot, (e, l, mx) in enumerate(zip(eids, lam, maxes)):
        new = mx / 3.0 - l
        state.cl_sum[e] = state.cl_sum[e] + (new - msgs[slot])
        msgs[slot] = new


def mplp_pass(state: DualState) -> DualState:
    """One sweep: every edge in ascending order, then every cluster in registration order."""
    for e in state.edge_order():
        update_edge(state, e)
    for ci in range(len(state.clusters)):
        update_cluster(state, ci)
    if state.debug:
        state.check()
    return state


def node_argmax(state: DualState) -> tuple[int, ...]:
    # np.argmax returns the first maximum: lowest state index on ties
    return tuple(int(np.argmax(nb)) for nb in state.node_b)


def decode_and_certify(net: MarkovNetwork, state: DualState, gap_tol: float = 1e-4):
    """Decode by per-node argmax and test the optimality certificate.

    Returns ``(assignment, value, certified)``.
    """
    x = node_argmax(state)
    value = energy(net, x)
    return x, value, dual_objective(state) - value <= gap_tol


def reparameterized_energy(state: DualState, x) -> float:
    """Sum of all reparameterized terms at ``x``; equals ``energy(net, x)``."""
    total = state.constant
    total += sum(float(nb[x[i]]) for i, nb in enumerate(state.node_b))
    total += sum(float(state.belief(e)[x[i], x[j]]) for e, (i, j) in enumerate(state.edges))
    for ci, cl in enumerate(state.clusters):
        a, b, c = cl.vars
        total += float(state.cluster_belief(ci)[x[a], x[b], x[c]])
    return total
