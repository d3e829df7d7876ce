"""Discrete Markov random fields in log-potential form.

A network is a list of factors over small variable scopes. Tables are
stored as numpy arrays shaped by the scope cardinalities, so the flat
C-order layout has the last scope variable varying fastest (the UAI
convention).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import InvalidAssignmentError, ParameterError, ParseError


@dataclass(frozen=True)
class Factor:
    scope: tuple[int, ...]
    table: np.ndarray

    def __post_init__(self):
        scope = tuple(int(v) for v in self.scope)
        table = np.array(self.table, dtype=float)
        table.setflags(write=False)
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "table", table)

    @property
    def arity(self) -> int:
        return len(self.scope)


@dataclass(frozen=True)
class MarkovNetwork:
    """Immutable discrete MRF.

    ``markov_edges`` holds every pair ``(i, j)`` with ``i < j`` that appears
    together in some factor scope.
    """

    cardinalities: tuple[int, ...]
    factors: tuple[Factor, ...]
    markov_edges: frozenset = field(init=False, compare=False)

    def __post_init__(self):
        cards = tuple(int(k) for k in self.cardinalities)
        if any(k < 1 for k in cards):
            raise ParameterError("cardinalities must be positive")
        object.__setattr__(self, "cardinalities", cards)
        factors = []
        for f in self.factors:
            if not isinstance(f, Factor):
                f = Factor(*f)
            if list(f.scope) != sorted(set(f.scope)):
                raise ParameterError(f"factor scope {f.scope} must be strictly increasing")
            if f.scope and (f.scope[0] < 0 or f.scope[-1] >= len(cards)):
                raise ParameterError(f"factor scope {f.scope} out of range")
            shape = tuple(cards[v] for v in f.scope)
            if f.table.size != math.prod(shape):
                raise ParameterError(
                    f"factor over {f.scope} needs {math.prod(shape)} entries, got {f.table.size}")
            if not np.all(np.isfinite(f.table)):
                raise ParameterError(f"factor over {f.scope} has non-finite entries")
            if f.table.shape != shape:
                f = Factor(f.scope, f.table.reshape(shape))
            factors.append(f)
        object.__setattr__(self, "factors", tuple(factors))
        edges = set()
        for f in factors:
            edges.update(combinations(f.scope, 2))
        object.__setattr__(self, "markov_edges", frozenset(edges))

    @property
    def num_vars(self) -> int:
        return len(self.cardinalities)

    def neighbors(self, i: int) -> list[int]:
        return sorted({b if a == i else a for a, b in self.markov_edges if i in (a, b)})

    def __eq__(self, other):
        if not isinstance(other, MarkovNetwork):
            return NotImplemented
        return (self.cardinalities == other.cardinalities
                and len(self.factors) == len(other.factors)
                and all(f.scope == g.scope and np.array_equal(f.table, g.table)
                        for f, g in zip(self.factors, other.factors)))

    __hash__ = None

    def allclose(self, other: "MarkovNetwork", atol: float = 1e-12) -> bool:
        """Structural equality with table values compared to ``atol``."""
        return (self.cardinalities == other.cardinalities
                and len(self.factors) == len(other.factors)
                and all(f.scope == g.scope and np.allclose(f.table, g.table, rtol=0, atol=atol)
                        for f, g in zip(self.factors, other.factors)))


def energy(net: MarkovNetwork, x: Sequence[int]) -> float:
    """Sum of log-potentials of assignment ``x``."""
    x = tuple(int(v) for v in x)
    if len(x) != net.num_vars:
        raise InvalidAssignmentError(
            f"assignment has {len(x)} entries, network has {net.num_vars} variables")
    for i, (xi, k) in enumerate(zip(x, net.cardinalities)):
        if not 0 <= xi < k:
            raise InvalidAssignmentError(f"state {xi} of variable {i} outside [0, {k})")
    total = 0.0
    for f in net.factors:
        total += float(f.table[tuple(x[v] for v in f.scope)])
    return total


# --------------------------------------------------------------------------- UAI

_TOKEN = re.compile(rb"\S+")


class _Tokens:
    def __init__(self, data: bytes):
        self._it = _TOKEN.finditer(data)
        self.end = len(data)
        self.offset = 0

    def next(self, what: str) -> bytes:
        m = next(self._it, None)
        if m is None:
            raise ParseError(f"unexpected end of input while reading {what}", self.end)
        self.offset = m.start()
        return m.group()

    def int(self, what: str) -> int:
        tok = self.next(what)
        try:
            value = int(tok)
        except ValueError:
            raise ParseError(f"expected integer {what}, got {tok!r}", self.offset) from None
        return value

    def real(self, what: str) -> float:
        tok = self.next(what)
        try:
            value = float(tok)
        except ValueError:
            raise ParseError(f"expected real {what}, got {tok!r}", self.offset) from None
        if not math.isfinite(value):
            raise ParseError(f"non-finite {what} {tok!r}", self.offset)
        return value

    def rest(self):
        return next(self._it, None)


def parse_uai(text) -> MarkovNetwork:
    """Parse a UAI MARKOV file (``MARKOV`` or the log-scale ``MARKOV LG`` variant)."""
    data = text.encode("ascii") if isinstance(text, str) else bytes(text)
    toks = _Tokens(data)
    header = toks.next("header")
    if header.upper() != b"MARKOV":
        raise ParseError(f"expected MARKOV header, got {header!r}", toks.offset)
    nxt = toks.next("variable count")
    log_scale = nxt.upper() == b"LG"
    if log_scale:
        nxt = toks.next("variable count")
    try:
        nvars = int(nxt)
    except ValueError:
        raise ParseError(f"expected integer variable count, got {nxt!r}", toks.offset) from None
    if nvars < 0:
        raise ParseError("negative variable count", toks.offset)
    cards = []
    for _ in range(nvars):
        k = toks.int("cardinality")
        if k < 1:
            raise ParseError(f"cardinality must be positive, got {k}", toks.offset)
        cards.append(k)
    nfac = toks.int("factor count")
    if nfac < 0:
        raise ParseError("negative factor count", toks.offset)
    scopes = []
    for _ in range(nfac):
        arity = toks.int("scope size")
        if arity < 0:
            raise ParseError("negative scope size", toks.offset)
        scope = []
        for _ in range(arity):
            v = toks.int("scope variable")
            if not 0 <= v < nvars:
                raise ParseError(f"scope variable {v} out of range", toks.offset)
            scope.append(v)
        if len(set(scope)) != len(scope):
            raise ParseError(f"repeated variable in scope {scope}", toks.offset)
        scopes.append(scope)
    factors = []
    for scope in scopes:
        shape = tuple(cards[v] for v in scope)
        expected = math.prod(shape)
        count = toks.int("table size")
        count_offset = toks.offset
        if count != expected:
            raise ParseError(
                f"table for scope {scope} declares {count} entries, scope needs {expected}",
                count_offset)
        values = np.empty(expected)
        for n in range(expected):
            v = toks.real("table entry")
            if not log_scale and v <= 0.0:
                raise ParseError(f"non-positive entry {v} in linear-scale table", toks.offset)
            values[n] = v
        table = values.reshape(shape)
        if not log_scale:
            table = np.log(table)
        factors.append(_canonical_factor(scope, table))
    extra = toks.rest()
    if extra is not None:
        raise ParseError(f"trailing data {extra.group()!r}", extra.start())
    return MarkovNetwork(tuple(cards), tuple(factors))


def _canonical_factor(scope, table) -> Factor:
    # UAI allows any scope order; store scopes ascending with axes permuted to match
    order = sorted(range(len(scope)), key=lambda a: scope[a])
    return Factor(tuple(scope[a] for a in order), np.transpose(table, order) if scope else table)


def serialize_uai(net: MarkovNetwork) -> bytes:
    """Write ``net`` as ``MARKOV LG`` text; values use shortest round-trip reprs."""
    lines = ["MARKOV LG", str(net.num_vars), " ".join(map(str, net.cardinalities)),
             str(len(net.factors))]
    for f in net.factors:
        lines.append(" ".join(map(str, (f.arity,) + f.scope)))
    lines.append("")
    for f in net.factors:
        lines.append(str(f.table.size))
        lines.append(" ".join(repr(float(v)) for v in f.table.ravel()))
        lines.append("")
    return ("\n".join(lines)).encode("ascii")


def read_uai(path) -> MarkovNetwork:
    with open(path, "rb") as fh:
        return parse_uai(fh.read())


# ----------------------------------------------------------------------- instances

INSTANCE_KINDS = ("frustrated_cycle", "grid_spin_glass", "complete_spin_glass", "random_triads")


def _ising(j: float) -> np.ndarray:
    return np.array([[j, -j], [-j, j]])


def generate_instance(kind: str, size, *, coupling: float = 1.0, field: float = 0.0,
                      states: int = 2, seed: int = 0) -> MarkovNetwork:
    """Synthetic instance families.

    frustrated_cycle
        Chordless ``size``-cycle of binary variables; each edge rewards
        disagreement with ``coupling``. ``size=3`` is the classic frustrated
        triangle with LP bound 3 and MAP value 2.
    grid_spin_glass
        ``rows x cols`` binary grid (``size`` is an int or a pair), couplings
        uniform on ``[-coupling, coupling]`` and fields on ``[-field, field]``.
    complete_spin_glass
        Same distributions on the complete graph over ``size`` variables.
    random_triads
        ``size`` variables with ``states`` states each, ``size`` random triad
        factors with entries uniform on ``[-coupling, coupling]`` plus fields.
    """
    rng = np.random.default_rng(seed)
    if kind == "frustrated_cycle":
        n = _single_size(size)
        table = np.array([[0.0, coupling], [coupling, 0.0]])
        factors = [Factor((i, i + 1), table) for i in range(n - 1)]
        factors.append(Factor((0, n - 1), table))
        return MarkovNetwork((2,) * n, tuple(factors))
    if kind == "grid_spin_glass":
        rows, cols = (size, size) if np.isscalar(size) else tuple(size)
        rows, cols = int(rows), int(cols)
        if rows < 2 or cols < 2:
            raise ParameterError(f"grid needs at least 2 rows and 2 columns, got {rows}x{cols}")
        n = rows * cols
        pairs = []
        for r in range(rows):
            for c in range(cols):
                v = r * cols + c
                if c + 1 < cols:
                    pairs.append((v, v + 1))
                if r + 1 < rows:
                    pairs.append((v, v + cols))
        return _spin_glass(n, sorted(pairs), coupling, field, rng)
    if kind == "complete_spin_glass":
        n = _single_size(size)
        return _spin_glass(n, list(combinations(range(n), 2)), coupling, field, rng)
    if kind == "random_triads":
        n = _single_size(size)
        if states < 2:
            raise ParameterError("random_triads needs at least 2 states")
        all_triples = list(combinations(range(n), 3))
        picks = rng.choice(len(all_triples), size=min(n, len(all_triples)), replace=False)
        factors = []
        if field:
            for i in range(n):
                factors.append(Factor((i,), rng.uniform(-field, field, states)))
        for t in sorted(picks):
            factors.append(Factor(all_triples[t], rng.uniform(-coupling, coupling, (states,) * 3)))
        return MarkovNetwork((states,) * n, tuple(factors))
    raise ParameterError(f"unknown instance kind {kind!r}; expected one of {INSTANCE_KINDS}")


def _single_size(size) -> int:
    if not np.isscalar(size):
        raise ParameterError(f"expected a single size, got {size!r}")
    n = int(size)
    if n < 3:
        raise ParameterError(f"size must be at least 3, got {n}")
    return n


def _spin_glass(n, pairs, coupling, field, rng) -> MarkovNetwork:
    factors = []
    if field:
        for i in range(n):
            h = rng.uniform(-field, field)
            factors.append(Factor((i,), np.array([h, -h])))
    for i, j in pairs:
        factors.append(Factor((i, j), _ising(rng.uniform(-coupling, coupling))))
    return MarkovNetwork((2,) * n, tuple(factors))
