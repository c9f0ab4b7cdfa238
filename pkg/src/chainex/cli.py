"""Command-line interface.

Exit codes are uniform across commands: 0 success, 1 domain failure
(invalid instance, failed verification, breached invariant, lower bounds
where the basic model is required), 2 usage, I/O or parse error.
"""
from __future__ import annotations

import argparse
import statistics
import sys
from typing import Sequence

from . import fixtures
from .chain import MODES, POLICIES, Smoothing, SolveConfig, solve
from .errors import ChainexError, ConfigError, ExportError, GenerationError, ParseError
from .instance import (
    GeneratorParams,
    admissible_links,
    generate_random,
    read_instance,
    serialize_instance,
    validate,
)
from .netform import build_network, compute_size, export_dimacs
from .oracle import solve_exact, verify_solution
from .solution import read_solution, render_report, serialize_solution

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

FIXTURES = {
    "three-cycle": fixtures.three_cycle,
    "three-cycle-spare": fixtures.three_cycle_with_spare,
    "splitting": fixtures.splitting,
    "gain-ring": fixtures.gain_ring,
    "two-node-swap": fixtures.two_node_swap,
}


class UsageError(Exception):
    pass


def _out(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _err(msg: str) -> None:
    print(f"chainex: {msg}", file=sys.stderr)


def _int_pair(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI integers, got {text!r}") from None
    return lo, hi


def _smoothing(text: str) -> Smoothing:
    try:
        w0, w1, rounds = text.split(",")
        return Smoothing(float(w0), float(w1), int(rounds))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected W0,W1,ROUNDS, got {text!r}") from None


def _load(path: str, fmt: str | None):
    try:
        return read_instance(path, fmt)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _require_valid(instance) -> bool:
    res = validate(instance)
    for msg in res.messages():
        _err(f"invalid instance: {msg}")
    return res.ok


# --------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    params = GeneratorParams(
        node_count=args.nodes,
        asset_count=args.assets,
        edge_density=args.density,
        assets_per_side=args.per_side,
        send_range=args.send_range,
        recv_range=args.recv_range,
        node_cap_range=args.cap_range,
        lower_bound_probability=args.lower_prob,
        value_range=tuple(args.values) if args.values else None,
        seed=args.seed,
    )
    inst = generate_random(params)
    _out(serialize_instance(inst, args.format), args.output)
    nodes, arcs = compute_size(inst)
    summary = (f"generated n={inst.node_count} |A|={len(inst.assets)} "
               f"admissible links={len(admissible_links(inst))} network={nodes} nodes/{arcs} arcs")
    print(summary, file=sys.stderr if args.output in (None, "-") else sys.stdout)
    return EXIT_OK


def cmd_fixture(args) -> int:
    _out(serialize_instance(FIXTURES[args.name](), args.format), args.output)
    return EXIT_OK


def _solve_config(args) -> SolveConfig:
    return SolveConfig(
        mode=args.mode,
        policy=args.policy,
        phases=2 if args.phases == "two" else 1,
        generalized=args.generalized,
        epsilon=args.epsilon,
        seed=args.seed,
        smoothing=args.smoothing,
        phase1_policy=args.phase1_policy,
    )


def cmd_solve(args) -> int:
    cfg = _solve_config(args)
    inst = _load(args.instance, args.format)
    if not _require_valid(inst):
        return EXIT_FAIL
    sol = solve(inst, cfg)
    if args.output:
        _out(serialize_solution(sol), args.output)
    if args.json:
        sys.stdout.write(serialize_solution(sol))
    else:
        sys.stdout.write(render_report(sol))
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = _load(args.instance, args.format)
    try:
        sol = read_solution(args.solution)
    except OSError as exc:
        raise UsageError(f"cannot read {args.solution}: {exc.strerror}") from None
    report = verify_solution(inst, sol)
    sys.stdout.write(report.render())
    return EXIT_OK if report.ok else EXIT_FAIL


def _compare_one(inst, cfg, objective):
    """Returns (heuristic, optimum, ratio)."""
    sol = solve(inst, cfg)
    opt = solve_exact(build_network(inst, prune=True), inst, objective).value
    heur = sol.objective_units if objective == "unit" else sol.objective_weighted
    ratio = 1.0 if opt == 0 else heur / opt
    return heur, opt, ratio


def _fmt(x) -> str:
    return f"{x:g}" if isinstance(x, float) else str(x)


def cmd_compare(args) -> int:
    cfg = _solve_config(args)
    if cfg.generalized:
        raise UsageError("compare covers the basic model only; drop --generalized")
    if args.trials is None:
        if args.instance is None:
            raise UsageError("compare needs an instance path or --trials N")
        insts = [_load(args.instance, args.format)]
    else:
        if args.instance is not None:
            raise UsageError("give either an instance path or --trials, not both")
        if args.trials < 1:
            raise UsageError("--trials must be >= 1")
        insts = [
            generate_random(GeneratorParams(
                node_count=args.nodes, asset_count=args.assets, edge_density=args.density,
                send_range=(1, args.max_cap), recv_range=(1, args.max_cap),
                node_cap_range=(1, args.max_cap), seed=args.seed + t))
            for t in range(args.trials)
        ]
    for inst in insts:
        if inst.node_count > args.max_nodes:
            raise UsageError(
                f"instance has {inst.node_count} participants, above the exact-oracle limit "
                f"of {args.max_nodes}; raise --max-nodes if you accept the run time")
        if not _require_valid(inst):
            return EXIT_FAIL
        if inst.has_lower_bounds():
            _err("instance has lower bounds; the exact oracle covers upper bounds only")
            return EXIT_FAIL

    rows = [_compare_one(inst, cfg, args.objective) for inst in insts]
    breach = [k for k, (h, o, _) in enumerate(rows) if h > o + 1e-9]
    if args.trials is None:
        h, o, r = rows[0]
        print(f"heuristic {_fmt(h)} / optimum {_fmt(o)} / ratio {r:.3f}")
    else:
        print(f"{'trial':>5} {'seed':>6} {'heuristic':>10} {'optimum':>10} {'ratio':>7}")
        for k, (h, o, r) in enumerate(rows):
            print(f"{k:>5} {args.seed + k:>6} {_fmt(h):>10} {_fmt(o):>10} {r:>7.3f}")
        ratios = [r for _, _, r in rows]
        print(f"trials {len(rows)}  mean ratio {statistics.fmean(ratios):.3f}  "
              f"min ratio {min(ratios):.3f}  optimal {sum(r == 1.0 for r in ratios)}")
    if breach:
        _err(f"heuristic exceeds optimum in trial(s) {breach}: invariant breached")
        return EXIT_FAIL
    return EXIT_OK


def cmd_export(args) -> int:
    inst = _load(args.instance, args.format)
    if not _require_valid(inst):
        return EXIT_FAIL
    if inst.has_lower_bounds():
        _err("instance has lower bounds; DIMACS export covers the basic model only")
        return EXIT_FAIL
    try:
        text = export_dimacs(build_network(inst, prune=True), args.objective)
    except ExportError as exc:
        _err(str(exc))
        return EXIT_FAIL
    _out(text, args.output)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _add_solve_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=MODES, default="forward")
    p.add_argument("--policy", choices=tuple(POLICIES), default="fifo")
    p.add_argument("--phase1-policy", choices=tuple(POLICIES), default=None,
                   help="root policy during phase 1 (defaults to --policy)")
    p.add_argument("--phases", choices=("one", "two"), default="one")
    p.add_argument("--generalized", action="store_true", help="apply arc multipliers")
    p.add_argument("--epsilon", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--smoothing", type=_smoothing, default=None, metavar="W0,W1,ROUNDS",
                   help="blend priorities with neighbour means before solving")


def _add_format(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "text"), default=None,
                   help="instance format (default: from the file extension)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chainex", description="Multi-party asset exchange solver")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random instance")
    g.add_argument("--nodes", type=int, required=True)
    g.add_argument("--assets", type=int, required=True)
    g.add_argument("--density", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--per-side", type=_int_pair, default=(1, 2), metavar="LO,HI",
                   help="assets per send/receive set")
    g.add_argument("--send-range", type=_int_pair, default=(1, 5), metavar="LO,HI")
    g.add_argument("--recv-range", type=_int_pair, default=(1, 5), metavar="LO,HI")
    g.add_argument("--cap-range", type=_int_pair, default=(1, 10), metavar="LO,HI")
    g.add_argument("--lower-prob", type=float, default=0.0)
    g.add_argument("--values", type=float, nargs=2, metavar=("LO", "HI"))
    g.add_argument("--format", choices=("json", "text"), default="json")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fixture", help="write a built-in example instance")
    f.add_argument("name", choices=tuple(FIXTURES))
    f.add_argument("--format", choices=("json", "text"), default="json")
    f.add_argument("-o", "--output")
    f.set_defaults(func=cmd_fixture)

    s = sub.add_parser("solve", help="run the chaining heuristic")
    s.add_argument("instance")
    _add_format(s)
    _add_solve_flags(s)
    s.add_argument("-o", "--output", help="solution JSON path")
    s.add_argument("--json", action="store_true", help="print solution JSON instead of the report")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check a solution against an instance")
    v.add_argument("instance")
    v.add_argument("solution")
    _add_format(v)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("compare", help="heuristic versus exact optimum")
    c.add_argument("instance", nargs="?")
    _add_format(c)
    _add_solve_flags(c)
    c.add_argument("--objective", choices=("unit", "weighted"), default="unit")
    c.add_argument("--trials", type=int, default=None, help="run a seeded random batch")
    c.add_argument("--nodes", type=int, default=8, help="batch instance size")
    c.add_argument("--assets", type=int, default=4)
    c.add_argument("--density", type=float, default=0.5)
    c.add_argument("--max-cap", type=int, default=5)
    c.add_argument("--max-nodes", type=int, default=50, help="exact-oracle size limit")
    c.set_defaults(func=cmd_compare)

    e = sub.add_parser("export", help="write the pruned network as DIMACS min-cost text")
    e.add_argument("instance")
    _add_format(e)
    e.add_argument("--dimacs", action="store_true", required=True)
    e.add_argument("--objective", choices=("unit", "weighted"), default="unit")
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_export)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ParseError, ConfigError, GenerationError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except OSError as exc:
        _err(f"{exc.filename or ''}: {exc.strerror}")
        return EXIT_USAGE
    except ChainexError as exc:
        _err(str(exc))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
