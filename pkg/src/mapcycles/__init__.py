"""MAP inference for discrete MRFs: MPLP dual descent tightened by frustrated-cycle search."""

__version__ = "0.1.0"

from .clusters import (VariableCycle, add_cluster, cluster_descent_step, enumerate_triangles,
                       score_cycle, triangulate_cycle)
from .cyclesearch import (CycleCandidate, ProjectionGraph, best_threshold_search, bound_d_cfp,
                          build_projection_graph, extract_variable_cycles, find_odd_cycle,
                          lambda_step, search_cycles)
from .dual import (Cluster, DualState, decode_and_certify, dual_objective, edge_belief, init_dual,
                   mplp_pass, node_belief)
from .model import (Factor, MarkovNetwork, energy, generate_instance, parse_uai, read_uai,
                    serialize_uai)
from .solver import SolveConfig, SolveResult, solve, write_trace
