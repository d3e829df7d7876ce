"""Cluster-pursuit schedule: initial MPLP, then alternate tightening and MPLP rounds."""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .clusters import VariableCycle, add_cluster, cluster_descent_step, enumerate_triangles, \
    score_cycle, triangulate_cycle
from .cyclesearch import SCORE_TOL, build_projection_graph, search_cycles
from .decode import best_decoding, certificate_search
from .dual import DualState, dual_objective, init_dual, mplp_pass, node_argmax
from .errors import ParameterError
from .model import MarkovNetwork, energy

log = logging.getLogger(__name__)

METHODS = ("triplet", "cycle", "triplet_plus_cycle")
OPTIMAL, BOUND_ONLY, NO_PROGRESS = "optimal_certified", "bound_only", "no_progress"
TRACE_FIELDS = ("outer_iter", "wall_time", "dual", "best_primal", "num_clusters", "phase")


@dataclass
class SolveConfig:
    method: str = "cycle"
    initial_iters: int = 1000
    inner_iters: int = 20
    gap_tol: float = 1e-4
    triplets_per_round: int = 10
    cycles_per_round: int = 3
    prune_factor: float = 1.0
    time_limit_secs: float | None = None
    seed: int = 0
    max_rounds: int = 1000
    min_new_triplets: int = 5
    # full (greedy + ICM) decode every this many initial passes
    decode_every: int = 25
    certificate_node_limit: int = 5000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.initial_iters < 0 or self.inner_iters < 0:
            raise ParameterError("iteration counts must be non-negative")
        if self.gap_tol < 0:
            raise ParameterError("gap tolerance must be non-negative")
        if not 5 <= self.triplets_per_round <= 20:
            raise ParameterError("triplets per round must lie in [5, 20]")
        if not 1 <= self.cycles_per_round <= 5:
            raise ParameterError("cycles per round must lie in [1, 5]")
        if self.prune_factor < 1:
            raise ParameterError("prune factor must be >= 1")
        if self.time_limit_secs is not None and self.time_limit_secs <= 0:
            raise ParameterError("time limit must be positive")


@dataclass
class TraceRow:
    outer_iter: int
    wall_time: float
    dual: float
    best_primal: float
    num_clusters: int
    phase: str


@dataclass
class SolveResult:
    status: str
    dual: float
    primal: float
    assignment: tuple
    clusters: int
    rounds: int
    wall_time_secs: float
    trace: list = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.dual - self.primal

    def summary(self) -> dict:
        return {"status": self.status, "dual": self.dual, "primal": self.primal,
                "gap": self.gap, "clusters": self.clusters, "rounds": self.rounds,
                "wall_time_secs": self.wall_time_secs}


def check_trace(rows, tol: float = 1e-9):
    """Raise ``AssertionError`` unless the dual falls, the primal rises and dual >= primal."""
    for prev, row in zip(rows, rows[1:]):
        assert row.dual <= prev.dual + tol, f"dual rose: {prev.dual} -> {row.dual}"
        assert row.best_primal >= prev.best_primal, "best primal fell"
    for row in rows:
        assert row.dual >= row.best_primal - tol, f"dual {row.dual} below primal {row.best_primal}"


def write_trace(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for r in rows:
            w.writerow([r.outer_iter, f"{r.wall_time:.12g}", f"{r.dual:.12g}",
                        f"{r.best_primal:.12g}", r.num_clusters, r.phase])


def read_trace(path) -> list[TraceRow]:
    with open(path, newline="") as fh:
        return [TraceRow(int(r["outer_iter"]), float(r["wall_time"]), float(r["dual"]),
                         float(r["best_primal"]), int(r["num_clusters"]), r["phase"])
                for r in csv.DictReader(fh)]


def propose_triplets(state: DualState, count: int) -> list[VariableCycle]:
    """Top unregistered triangles of the current edge set by bound criterion."""
    scored = []
    for tri in enumerate_triangles(state):
        if frozenset(tri.vars) in state.cluster_index:
            continue
        d = score_cycle(state, tri)
        if d > SCORE_TOL:
            scored.append(VariableCycle(tri.vars, bound=d))
    scored.sort(key=lambda c: (-c.bound, c.vars))
    return scored[:count]


def propose_cycles(state: DualState, cfg: SolveConfig) -> list[VariableCycle]:
    """Frustrated cycles that bring new triplets, at least ``min_new_triplets`` if available."""
    chosen, new = [], set()
    for cyc in search_cycles(state, prune_factor=cfg.prune_factor):
        if len(chosen) >= cfg.cycles_per_round and len(new) >= cfg.min_new_triplets:
            break
        keys = {cl.key for cl in triangulate_cycle(cyc)} - set(state.cluster_index)
        if keys - new:
            chosen.append(cyc)
            new |= keys
    return chosen


class _Run:
    def __init__(self, net, cfg, debug):
        self.net, self.cfg = net, cfg
        self.start = time.perf_counter()
        self.state = init_dual(net, debug=debug)
        self.rng = np.random.default_rng(cfg.seed)
        self.rows: list[TraceRow] = []
        self.best_x, self.best = None, -math.inf
        self.added = 0
        self.dual = dual_objective(self.state)
        self.pass_duals = [self.dual]

    def recent_decrease(self, passes):
        """Dual decrease over the last ``passes`` MPLP passes of the current block."""
        window = self.pass_duals[-(passes + 1):]
        return window[0] - window[-1]

    def elapsed(self):
        return time.perf_counter() - self.start

    def out_of_time(self):
        lim = self.cfg.time_limit_secs
        return lim is not None and self.elapsed() >= lim

    def offer(self, x, value=None):
        value = energy(self.net, x) if value is None else value
        if value > self.best:
            self.best_x, self.best = tuple(x), value

    def decode(self, full=False, certify=False):
        self.dual = dual_objective(self.state)
        self.offer(node_argmax(self.state))
        if full:
            self.offer(*best_decoding(self.net, self.state, self.rng, restarts=1))
        if certify and not self.certified():
            x = certificate_search(self.state, self.cfg.gap_tol,
                                   node_limit=self.cfg.certificate_node_limit)
            if x is not None:
                self.offer(x)

    def certified(self):
        return self.dual - self.best <= self.cfg.gap_tol

    def record(self, outer, phase):
        self.rows.append(TraceRow(outer, self.elapsed(), self.dual, self.best, self.added, phase))

    def apply(self, cycles, triplets):
        before = self.added
        for cyc in list(cycles) + list(triplets):
            for cl in triangulate_cycle(cyc):
                if cl.key not in self.state.cluster_index:
                    add_cluster(self.state, cl)
                    self.added += 1
            cluster_descent_step(self.state, cyc)
        return self.added - before


def solve(net: MarkovNetwork, config: SolveConfig | None = None, dump_projection=None,
          debug: bool | None = None) -> SolveResult:
    """Run the tightening schedule on ``net``.

    ``dump_projection`` is an optional path that receives the projection
    graph edge list of the beliefs at the end of the initial phase.
    """
    cfg = config or SolveConfig()
    run = _Run(net, cfg, debug)
    state = run.state
    run.decode(full=True)
    run.record(0, "initial")
    status = None
    for it in range(cfg.initial_iters):
        mplp_pass(state)
        last = it == cfg.initial_iters - 1
        run.decode(full=last or (it + 1) % cfg.decode_every == 0)
        run.pass_duals.append(run.dual)
        run.record(0, "initial")
        if run.certified():
            break
        if run.out_of_time():
            status = BOUND_ONLY
            break
    if not run.certified():
        run.decode(full=True, certify=True)
    if dump_projection is not None:
        with open(dump_projection, "w") as fh:
            fh.write(build_projection_graph(state).dump())
    log.info("initial phase: dual %.6f primal %.6f", run.dual, run.best)

    rounds = 0
    while status is None:
        if run.certified():
            status = OPTIMAL
            break
        if run.out_of_time() or rounds >= cfg.max_rounds:
            status = BOUND_ONLY
            break
        rounds += 1
        cycles = propose_cycles(state, cfg) if cfg.method != "triplet" else []
        triplets = []
        if cfg.method != "cycle":
            have = {cl.key for c in cycles for cl in triangulate_cycle(c)}
            triplets = [t for t in propose_triplets(state, cfg.triplets_per_round)
                        if frozenset(t.vars) not in have]
        new = 0
        if cycles or triplets:
            new = run.apply(cycles, triplets)
            run.decode(full=True)
            run.record(rounds, "tighten")
            log.info("round %d: %d cycles, %d triplets, %d new clusters, dual %.6f",
                     rounds, len(cycles), len(triplets), new, run.dual)
        if new == 0:
            # nothing to add: only worth another MPLP block while the dual is still falling
            if run.recent_decrease(cfg.inner_iters) <= cfg.gap_tol:
                status = NO_PROGRESS
                break
            log.info("round %d: no new clusters, dual still decreasing", rounds)
        run.pass_duals = [run.dual]
        for _ in range(cfg.inner_iters):
            if run.certified() or run.out_of_time():
                break
            mplp_pass(state)
            run.decode(full=True)
            run.pass_duals.append(run.dual)
            run.record(rounds, "inner")
        if not run.certified():
            run.decode(full=True, certify=True)
    if run.certified():
        status = OPTIMAL
    return SolveResult(status, run.dual, run.best, run.best_x, run.added, rounds,
                       run.elapsed(), run.rows)
