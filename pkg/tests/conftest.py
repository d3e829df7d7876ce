import math
from itertools import combinations

import numpy as np
import pytest

from mapcycles.cyclesearch import ProjectionGraph
from mapcycles.model import Factor, MarkovNetwork, generate_instance


def random_network(rng, n_vars=None, max_k=4, max_states=2 ** 14, triads=True):
    """Random model with unary, pairwise and (optionally) triad factors.

    Cardinalities are drawn so the joint state space stays brute-forceable.
    """
    n = int(rng.integers(3, 16)) if n_vars is None else n_vars
    cards = []
    for i in range(n):
        room = max_states // max(1, math.prod(cards)) // 2 ** (n - i - 1)
        cards.append(int(rng.integers(2, max(2, min(max_k, room)) + 1)))
    factors = []
    for i in range(n):
        if rng.random() < 0.7:
            factors.append(Factor((i,), rng.normal(size=cards[i])))
    pairs = list(combinations(range(n), 2))
    rng.shuffle(pairs)
    for i, j in sorted(pairs[: int(rng.integers(n - 1, 2 * n + 1))]):
        factors.append(Factor((i, j), rng.normal(size=(cards[i], cards[j]))))
    if triads and n >= 3:
        for _ in range(int(rng.integers(0, 3))):
            a, b, c = sorted(rng.choice(n, size=3, replace=False))
            factors.append(Factor((int(a), int(b), int(c)),
                                  rng.normal(size=(cards[a], cards[b], cards[c]))))
    return MarkovNetwork(tuple(cards), tuple(factors))


def random_cycle_network(rng, n, max_k=3, scale=1.0):
    """Chordless ``n``-cycle with random unary and pairwise tables."""
    cards = [int(rng.integers(2, max_k + 1)) for _ in range(n)]
    factors = [Factor((i,), scale * rng.normal(size=cards[i])) for i in range(n)]
    for i in range(n):
        j = (i + 1) % n
        a, b = min(i, j), max(i, j)
        factors.append(Factor((a, b), scale * rng.normal(size=(cards[a], cards[b]))))
    return MarkovNetwork(tuple(cards), tuple(factors))


@pytest.fixture
def example1():
    return generate_instance("frustrated_cycle", 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_signed_graph(rng, max_nodes=12):
    """Signed weighted graph with small integer magnitudes, so thresholds tie."""
    n = int(rng.integers(3, max_nodes + 1))
    p = rng.uniform(0.15, 0.5)
    edges = []
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < p:
                edges.append((a, b, float(rng.choice([-1, 1]) * rng.integers(1, 6))))
    return ProjectionGraph.from_edges(n, edges)
