"""Command line: ``mapcycles solve`` and ``mapcycles gen``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .errors import MapCyclesError
from .model import INSTANCE_KINDS, generate_instance, read_uai, serialize_uai
from .solver import METHODS, OPTIMAL, SolveConfig, solve, write_trace


def _size(text):
    parts = text.lower().split("x")
    try:
        nums = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must be N or RxC, got {text!r}") from None
    if len(nums) == 1:
        return nums[0]
    if len(nums) == 2:
        return tuple(nums)
    raise argparse.ArgumentTypeError(f"size must be N or RxC, got {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(prog="mapcycles",
                                     description="MAP inference by cluster pursuit over frustrated cycles.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log each tightening round")
    sub = parser.add_subparsers(dest="command", required=True)

    d = SolveConfig()
    p = sub.add_parser("solve", help="solve a UAI MARKOV file")
    p.add_argument("input", help="UAI MARKOV file")
    p.add_argument("--method", choices=METHODS, default=d.method)
    p.add_argument("--gap-tol", type=float, default=d.gap_tol)
    p.add_argument("--initial-iters", type=int, default=d.initial_iters)
    p.add_argument("--inner-iters", type=int, default=d.inner_iters)
    p.add_argument("--triplets", type=int, default=d.triplets_per_round,
                   help="triplets added per round (5-20)")
    p.add_argument("--cycles", type=int, default=d.cycles_per_round,
                   help="cycles added per round (1-5)")
    p.add_argument("--prune-factor", type=float, default=d.prune_factor,
                   help="keep projection edges with |s| >= R/c (default 1; 4 suits non-binary models)")
    p.add_argument("--time-limit", type=float, default=None, help="seconds")
    p.add_argument("--trace-out", help="write the CSV trace here")
    p.add_argument("--dump-projection", help="write the projection graph edge list here")
    p.add_argument("--seed", type=int, default=d.seed)

    g = sub.add_parser("gen", help="write a synthetic instance as UAI")
    g.add_argument("--kind", choices=INSTANCE_KINDS, required=True)
    g.add_argument("--size", type=_size, required=True, help="N, or RxC for grids")
    g.add_argument("--coupling", type=float, default=1.0)
    g.add_argument("--field", type=float, default=0.0)
    g.add_argument("--states", type=int, default=2, help="states per variable (random_triads)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    return parser


def cmd_solve(args) -> int:
    cfg = SolveConfig(method=args.method, initial_iters=args.initial_iters,
                      inner_iters=args.inner_iters, gap_tol=args.gap_tol,
                      triplets_per_round=args.triplets, cycles_per_round=args.cycles,
                      prune_factor=args.prune_factor, time_limit_secs=args.time_limit,
                      seed=args.seed)
    net = read_uai(args.input)
    result = solve(net, cfg, dump_projection=args.dump_projection)
    if args.trace_out:
        write_trace(result.trace, args.trace_out)
    json.dump(result.summary(), sys.stdout)
    sys.stdout.write("\n")
    return 0 if result.status == OPTIMAL else 2


def cmd_gen(args) -> int:
    net = generate_instance(args.kind, args.size, coupling=args.coupling, field=args.field,
                            states=args.states, seed=args.seed)
    with open(args.out, "wb") as fh:
        fh.write(serialize_uai(net))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return cmd_solve(args) if args.command == "solve" else cmd_gen(args)
    except (MapCyclesError, OSError) as exc:
        print(f"mapcycles: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
