"""Command-line front end: ``reorder``, ``explain``, ``simulate`` and ``bench``.

Exit codes::

    0   success
    1   query syntax error
    2   unsupported query construct
    3   endpoint-variable dependencies cannot be satisfied
    4   exhaustive cap exceeded (use --strategy greedy)
    5   query names an endpoint missing from the federation
    6   federation manifest or data could not be loaded
    7   query is outside what the simulator evaluates
    64  bad command-line usage
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from typing import Any, TextIO

from . import bench
from .cost import CostConfig, Method, load_config
from .model import FederatedQuery
from .ntriples import NTriplesError
from .parser import ErrorKind, ParseError, parse_query, serialize_query
from .planner import DependencyUnsatisfiable, ExhaustiveCapExceeded, PlanReport, plan
from .simulator import (
    FederationError,
    SimulationError,
    SimulationResult,
    UnknownEndpoint,
    best_order,
    evaluate_sequence,
    load_federation,
    simulate_orderings,
)
from .workload import WorkloadParams

EXIT_OK = 0
EXIT_SYNTAX = 1
EXIT_UNSUPPORTED = 2
EXIT_DEPENDENCY = 3
EXIT_CAP = 4
EXIT_UNKNOWN_ENDPOINT = 5
EXIT_FEDERATION = 6
EXIT_SIMULATION = 7
EXIT_USAGE = 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would collide with "unsupported construct"
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fedreorder", description="Reorder SERVICE patterns in federated SPARQL queries.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    io = _Parser(add_help=False)
    io.add_argument("--in", dest="input", default="-", metavar="FILE", help="query file, '-' for stdin")
    io.add_argument("--out", dest="output", default="-", metavar="FILE", help="output file, '-' for stdout")
    io.add_argument("--verbose", action="store_true", help="print a plan summary on stderr")

    planning = _Parser(add_help=False)
    planning.add_argument("--method", type=str.lower, choices=["vc", "uvc", "wuvc", "jwuvc"])
    planning.add_argument("--strategy", choices=["exhaustive", "greedy", "auto"], default="auto")
    planning.add_argument("--config", metavar="JSON", help="cost configuration file")

    sub.add_parser("reorder", parents=[io, planning], help="write the reordered query")
    explain = sub.add_parser("explain", parents=[io, planning], help="report costs and the chosen order")
    explain.add_argument("--format", choices=["json", "text"], default="json")

    simulate = sub.add_parser(
        "simulate", parents=[io, planning], help="compare call counts on an in-memory federation"
    )
    simulate.add_argument("--federation", required=True, metavar="JSON", help="federation manifest")
    simulate.add_argument("--max-solutions", type=int, metavar="N", help="abort above N intermediate rows")
    simulate.add_argument("--format", choices=["json", "text"], default="json")

    bench_p = sub.add_parser("bench", help="planning-time sweep and simulated accuracy")
    bench_p.add_argument("--out", dest="output", default="-", metavar="FILE")
    bench_p.add_argument("--seed", type=int, default=bench.DEFAULT_SEED)
    bench_p.add_argument("--corpus-size", type=int, default=bench.DEFAULT_CORPUS_SIZE)
    bench_p.add_argument("--max-n", type=int, default=9, help="largest service count planned exhaustively")
    bench_p.add_argument("--repeats", type=int, default=3)
    bench_p.add_argument("--min-services", type=int, default=2)
    bench_p.add_argument("--max-services", type=int, default=5)
    bench_p.add_argument("--min-triples", type=int, default=100)
    bench_p.add_argument("--max-triples", type=int, default=10_000)
    bench_p.add_argument("--format", choices=["json", "text"], default="text")
    bench_p.add_argument("--corpus-out", metavar="FILE", help="also write the corpus manifest and accuracy baseline")
    return parser


def _read_input(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write_output(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _config(args: argparse.Namespace) -> CostConfig:
    method = Method.parse(args.method) if args.method else None
    if args.config:
        try:
            return load_config(args.config, method=method)
        except (OSError, ValueError, TypeError) as exc:
            raise _UsageError(f"config: {exc}") from None
    return CostConfig() if method is None else CostConfig(method=method)


def _summary(report: PlanReport) -> str:
    order = " | ".join(" ".join(f"r{i + 1}" for i in seg) for seg in report.chosen_order)
    lines = [f"method {report.method.value}, strategy {report.strategy.value}, cost {report.chosen_cost:.6g}"]
    lines.append(f"order {order}")
    if report.constraints_applied:
        lines.append("constraints " + ", ".join(report.constraints_applied))
    return "\n".join(lines) + "\n"


def _plan(args: argparse.Namespace) -> tuple[FederatedQuery, FederatedQuery, PlanReport]:
    q = parse_query(_read_input(args.input))
    out, report = plan(q, _config(args), args.strategy)
    if args.verbose:
        sys.stderr.write(_summary(report))
    return q, out, report


def run_reorder(args: argparse.Namespace) -> int:
    _, out, _ = _plan(args)
    _write_output(args.output, serialize_query(out))
    return EXIT_OK


def _explain_text(report: PlanReport) -> str:
    lines = [_summary(report), f"{'service':>7}  {'segment':>7}  {'cost':>10}  {'in order':>10}  {'tie':>3}"]
    for c in report.per_service_costs:
        lines.append(
            f"{'r' + str(c.original_index + 1):>7}  {c.segment:>7}  {c.cost:>10.4f}"
            f"  {c.cost_in_order:>10.4f}  {c.tie_break:>3}"
        )
    for k, table in enumerate(report.permutation_tables):
        if table is None:
            continue
        lines += ["", f"segment {k} permutations"]
        for order, cost in table:
            lines.append(f"  {' '.join(f'r{i + 1}' for i in order):<40} {cost:.6f}")
    return "\n".join(lines) + "\n"


def run_explain(args: argparse.Namespace) -> int:
    _, _, report = _plan(args)
    if args.format == "json":
        text = json.dumps(report.to_dict(), indent=2) + "\n"
    else:
        text = _explain_text(report)
    _write_output(args.output, text)
    return EXIT_OK


def _order_of(q: FederatedQuery) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(s.original_index for s in seg.services) for seg in q.segments)


def _sim_entry(order: tuple[tuple[int, ...], ...], r: SimulationResult) -> dict[str, Any]:
    return {
        "order": [list(seg) for seg in order],
        "total_calls": r.total_calls,
        "per_service_calls": [{"original_index": i, "calls": n} for i, n in r.per_service_calls],
        "intermediate_sizes": r.intermediate_sizes,
        "solutions": r.solution_count,
    }


def run_simulate(args: argparse.Namespace) -> int:
    q, out, report = _plan(args)
    cfg = _config(args)
    try:
        fed = load_federation(args.federation)
    except (OSError, NTriplesError) as exc:
        raise FederationError(str(exc)) from None
    limit = args.max_solutions
    cache: dict = {}
    input_run = evaluate_sequence(q, fed, keep_solutions=False, cache=cache, max_solutions=limit)
    planned_run = evaluate_sequence(out, fed, keep_solutions=False, cache=cache, max_solutions=limit)
    doc: dict[str, Any] = {
        "method": report.method.value,
        "strategy": report.strategy.value,
        "input": _sim_entry(_order_of(q), input_run),
        "planned": _sim_entry(report.chosen_order, planned_run),
        "optimal": None,
        "planned_is_optimal": None,
    }
    if all(len(seg.services) <= cfg.exhaustive_cap for seg in q.segments):
        results = simulate_orderings(q, fed, cfg.exhaustive_cap, limit)
        best = best_order(results)
        doc["optimal"] = _sim_entry(best.order, results[best.order])
        doc["planned_is_optimal"] = planned_run.total_calls == best.total_calls
    if args.format == "json":
        text = json.dumps(doc, indent=2) + "\n"
    else:
        lines = [f"{'order':<10} {'calls':>8} {'solutions':>10}  sequence"]
        for name in ("input", "planned", "optimal"):
            e = doc[name]
            if e is not None:
                seq = " | ".join(" ".join(f"r{i + 1}" for i in seg) for seg in e["order"])
                lines.append(f"{name:<10} {e['total_calls']:>8} {e['solutions']:>10}  {seq}")
        if doc["planned_is_optimal"] is not None:
            lines.append(f"planned order reaches the optimum: {'yes' if doc['planned_is_optimal'] else 'no'}")
        text = "\n".join(lines) + "\n"
    _write_output(args.output, text)
    return EXIT_OK


def run_bench(args: argparse.Namespace) -> int:
    if args.max_n < 2 or args.corpus_size < 1 or args.repeats < 1:
        raise _UsageError("--max-n must be >= 2, --corpus-size and --repeats >= 1")
    params = WorkloadParams(
        min_services=args.min_services,
        max_services=args.max_services,
        min_triples=args.min_triples,
        max_triples=args.max_triples,
    )
    if not 1 <= params.min_services <= params.max_services or not 1 <= params.min_triples <= params.max_triples:
        raise _UsageError("service and triple ranges must be positive and ordered")
    report, manifest = bench.run_bench(
        seed=args.seed,
        corpus_size=args.corpus_size,
        sweep=range(2, args.max_n + 1),
        greedy_sweep_to=max(12, args.max_n),
        repeats=args.repeats,
        params=params,
    )
    if args.format == "json":
        text = json.dumps(report, indent=2) + "\n"
    else:
        text = bench.format_report(report)
    if args.corpus_out:
        with open(args.corpus_out, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=1)
            fh.write("\n")
    _write_output(args.output, text)
    return EXIT_OK


_COMMANDS = {"reorder": run_reorder, "explain": run_explain, "simulate": run_simulate, "bench": run_bench}


def main(argv: Sequence[str] | None = None, *, stderr: TextIO | None = None) -> int:
    err = stderr if stderr is not None else sys.stderr
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ParseError as exc:
        kind = "unsupported construct" if exc.kind is ErrorKind.UNSUPPORTED else "syntax error"
        err.write(f"error: {kind} at {exc.line}:{exc.column}: {exc.message}\n")
        return EXIT_UNSUPPORTED if exc.kind is ErrorKind.UNSUPPORTED else EXIT_SYNTAX
    except DependencyUnsatisfiable as exc:
        err.write(f"error: {exc}\n")
        return EXIT_DEPENDENCY
    except ExhaustiveCapExceeded as exc:
        err.write(f"error: {exc}\n")
        return EXIT_CAP
    except UnknownEndpoint as exc:
        err.write(f"error: {exc}\n")
        return EXIT_UNKNOWN_ENDPOINT
    except FederationError as exc:
        err.write(f"error: federation: {exc}\n")
        return EXIT_FEDERATION
    except SimulationError as exc:
        err.write(f"error: simulation: {exc}\n")
        return EXIT_SIMULATION
    except _UsageError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
