"""Planning-time sweep and simulated accuracy over a seeded corpus."""

from __future__ import annotations

import hashlib
import random
import time
from dataclasses import asdict, dataclass, replace
from typing import Any

from .cost import CostConfig, Method
from .model import FederatedQuery
from .ntriples import format_ntriples
from .planner import exhaustive_plan, greedy_plan
from .simulator import Federation, SimulationLimitExceeded, best_order, simulate_orderings
from .workload import Instance, WorkloadParams, generate_instance, random_query

# published reordering times for JWUVC, in milliseconds, keyed by service count
PUBLISHED_TIMES_MS: dict[int, float] = {
    5: 8, 6: 22, 7: 89, 8: 290, 9: 2_400, 10: 25_000, 11: 360_000, 12: 4_020_000,
}

DEFAULT_SEED = 0
DEFAULT_CORPUS_SIZE = 200
DEFAULT_MAX_SOLUTIONS = 20_000


# --- planning time -----------------------------------------------------------------------


@dataclass(frozen=True)
class TimingRow:
    n: int
    exhaustive_ms: float | None
    greedy_ms: float
    published_ms: float | None


def _best_time(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        times.append(time.perf_counter() - started)
    return min(times) * 1000


def sweep_query(n: int, seed: int = DEFAULT_SEED) -> FederatedQuery:
    """The synthetic query timed at size ``n``; constant endpoints, so all n! orders are valid."""
    return random_query(random.Random(f"{seed}:{n}"), n)


def timing_sweep(
    ns: range | list[int],
    *,
    seed: int = DEFAULT_SEED,
    repeats: int = 3,
    exhaustive_up_to: int | None = None,
    method: Method = Method.JWUVC,
) -> list[TimingRow]:
    """Best-of-``repeats`` wall time of exhaustive and greedy planning per service count.

    Exhaustive runs only for ``n <= exhaustive_up_to`` (default: every n).
    """
    limit = max(ns) if exhaustive_up_to is None else exhaustive_up_to
    cfg = CostConfig(method=method, exhaustive_cap=max(limit, 1))
    rows = []
    for n in ns:
        q = sweep_query(n, seed)
        exhaustive = _best_time(lambda: exhaustive_plan(q, cfg), repeats) if n <= limit else None
        greedy = _best_time(lambda: greedy_plan(q, cfg), repeats)
        rows.append(TimingRow(n, exhaustive, greedy, PUBLISHED_TIMES_MS.get(n)))
    return rows


# --- accuracy ----------------------------------------------------------------------------


def federation_digest(fed: Federation) -> str:
    h = hashlib.sha256()
    for iri in sorted(fed.stores):
        h.update(f"# {iri}\n".encode())
        h.update(format_ntriples(sorted(fed.stores[iri].triples)).encode())
    return h.hexdigest()


@dataclass
class CorpusItem:
    instance: Instance
    calls: dict[tuple[tuple[int, ...], ...], int]
    optimal_calls: int

    def entry(self) -> dict[str, Any]:
        return {
            "seed": self.instance.seed,
            "services": len(self.instance.query.services),
            "query": self.instance.query_text,
            "federation_sha256": federation_digest(self.instance.federation),
            "optimal_calls": self.optimal_calls,
        }


@dataclass(frozen=True)
class Corpus:
    seed: int
    params: WorkloadParams
    max_solutions: int
    items: tuple[CorpusItem, ...]
    skipped: tuple[int, ...]

    def manifest(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "size": len(self.items),
            "max_solutions": self.max_solutions,
            "params": asdict(self.params),
            "skipped_seeds": list(self.skipped),
            "instances": [item.entry() for item in self.items],
        }


def build_corpus(
    size: int = DEFAULT_CORPUS_SIZE,
    seed: int = DEFAULT_SEED,
    params: WorkloadParams = WorkloadParams(),
    max_solutions: int = DEFAULT_MAX_SOLUTIONS,
    cap: int = 9,
) -> Corpus:
    """Instances with seeds ``seed, seed+1, ...``, simulated under every valid ordering.

    An instance where some ordering holds more than ``max_solutions``
    distinct rows is skipped and recorded, and the next seed takes its place.
    """
    items: list[CorpusItem] = []
    skipped: list[int] = []
    k = seed
    while len(items) < size:
        inst = generate_instance(k, params)
        k += 1
        try:
            results = simulate_orderings(inst.query, inst.federation, cap, max_solutions)
        except SimulationLimitExceeded:
            skipped.append(inst.seed)
            continue
        calls = {order: r.total_calls for order, r in results.items()}
        items.append(CorpusItem(inst, calls, best_order(results).total_calls))
    return Corpus(seed, params, max_solutions, tuple(items), tuple(skipped))


@dataclass(frozen=True)
class MethodAccuracy:
    method: str
    exhaustive_hit_rate: float
    greedy_hit_rate: float
    greedy_agreement: float


def accuracy(corpus: Corpus, cfg: CostConfig = CostConfig()) -> list[MethodAccuracy]:
    """Per method: how often each strategy reaches the simulated-optimal call count,
    and how often greedy's model cost equals exhaustive's."""
    out = []
    n = len(corpus.items)
    for method in Method:
        mcfg = replace(cfg, method=method)
        hits = greedy_hits = agree = 0
        for item in corpus.items:
            q = item.instance.query
            _, ex = exhaustive_plan(q, mcfg, record_table=False)
            _, gr = greedy_plan(q, mcfg)
            hits += item.calls[ex.chosen_order] == item.optimal_calls
            greedy_hits += item.calls[gr.chosen_order] == item.optimal_calls
            agree += abs(gr.chosen_cost - ex.chosen_cost) <= 1e-9 * max(1.0, abs(ex.chosen_cost))
        out.append(MethodAccuracy(method.value, hits / n, greedy_hits / n, agree / n))
    return out


# --- reporting ---------------------------------------------------------------------------


def run_bench(
    *,
    seed: int = DEFAULT_SEED,
    corpus_size: int = DEFAULT_CORPUS_SIZE,
    sweep: range = range(2, 10),
    greedy_sweep_to: int = 12,
    repeats: int = 3,
    params: WorkloadParams = WorkloadParams(),
    cfg: CostConfig = CostConfig(),
) -> tuple[dict[str, Any], dict[str, Any]]:
    """Returns the report and the corpus manifest with its accuracy baseline."""
    ns = list(sweep) + list(range(max(sweep) + 1, greedy_sweep_to + 1))
    timing = timing_sweep(ns, seed=seed, repeats=repeats, exhaustive_up_to=max(sweep), method=cfg.method)
    corpus = build_corpus(corpus_size, seed, params)
    methods = [asdict(a) for a in accuracy(corpus, cfg)]
    report = {
        "seed": seed,
        "timing": [asdict(r) for r in timing],
        "accuracy": {
            "instances": len(corpus.items),
            "skipped_seeds": list(corpus.skipped),
            "methods": methods,
        },
    }
    return report, {**corpus.manifest(), "baseline": methods}


def _fmt_ms(value: float | None) -> str:
    if value is None:
        return "-"
    return f"{value:.3f}" if value < 10 else f"{value:.0f}"


def format_report(report: dict[str, Any]) -> str:
    lines = [f"seed {report['seed']}", "", f"{'n':>3}  {'exhaustive ms':>14}  {'greedy ms':>10}  {'published ms':>13}"]
    for row in report["timing"]:
        lines.append(
            f"{row['n']:>3}  {_fmt_ms(row['exhaustive_ms']):>14}  {_fmt_ms(row['greedy_ms']):>10}"
            f"  {'-' if row['published_ms'] is None else format(row['published_ms'], '.0f'):>13}"
        )
    acc = report["accuracy"]
    lines += [
        "",
        f"{acc['instances']} instances ({len(acc['skipped_seeds'])} seeds skipped)",
        f"{'method':<6}  {'exhaustive hit':>14}  {'greedy hit':>10}  {'greedy=exhaustive':>17}",
    ]
    for m in acc["methods"]:
        lines.append(
            f"{m['method']:<6}  {m['exhaustive_hit_rate']:>14.3f}  {m['greedy_hit_rate']:>10.3f}"
            f"  {m['greedy_agreement']:>17.3f}"
        )
    return "\n".join(lines) + "\n"
