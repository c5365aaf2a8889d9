"""Choose an execution order for the SERVICE patterns of a query.

Each segment (the top-level run of SERVICE blocks between OPTIONAL groups,
or the contents of one OPTIONAL group) is reordered independently; nothing
ever crosses a segment boundary. Variables exposed by earlier segments count
as bound when a later segment is costed.
"""

from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import AbstractSet

from .cost import CostConfig, Method, tie_break_score, unrestrictiveness
from .model import FederatedQuery, QuerySegment, ServicePattern, bound_after, exposed_variables

TIE_TOLERANCE = 1e-9


class PlanningError(Exception):
    pass


class DependencyUnsatisfiable(PlanningError):
    pass


class ExhaustiveCapExceeded(PlanningError):
    pass


class Strategy(Enum):
    EXHAUSTIVE = "Exhaustive"
    GREEDY = "Greedy"
    SORT = "Sort"


@dataclass(frozen=True)
class ServiceCost:
    original_index: int
    segment: int
    cost: float  # given only the bindings of earlier segments
    cost_in_order: float  # given everything placed before it in the chosen order
    tie_break: int


@dataclass(frozen=True)
class PlanReport:
    method: Method
    strategy: Strategy
    chosen_order: tuple[tuple[int, ...], ...]
    chosen_cost: float
    per_service_costs: tuple[ServiceCost, ...]
    permutation_tables: tuple[tuple[tuple[tuple[int, ...], float], ...] | None, ...] = ()
    constraints_applied: tuple[str, ...] = ()

    @property
    def flat_order(self) -> tuple[int, ...]:
        return tuple(i for seg in self.chosen_order for i in seg)

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "strategy": self.strategy.value,
            "chosen_order": [list(o) for o in self.chosen_order],
            "chosen_cost": self.chosen_cost,
            "services": [
                {
                    "original_index": c.original_index,
                    "segment": c.segment,
                    "cost": c.cost,
                    "cost_in_order": c.cost_in_order,
                    "tie_break": c.tie_break,
                }
                for c in self.per_service_costs
            ],
            "permutation_tables": [
                None if table is None else [{"order": list(o), "cost": c} for o, c in table]
                for table in self.permutation_tables
            ],
            "constraints_applied": list(self.constraints_applied),
        }


def sequence_weights(n: int) -> list[float]:
    """Positional weights ``(n - i + 1) / n`` for i = 1..n."""
    if n <= 0:
        raise ValueError(f"sequence length must be positive, got {n}")
    return [(n - i) / n for i in range(n)]


def sequence_cost(
    order: Sequence[ServicePattern], cfg: CostConfig, bound: AbstractSet[str] = frozenset()
) -> float:
    if not order:
        raise ValueError("empty order")
    total = 0.0
    b = frozenset(bound)
    for s, w in zip(order, sequence_weights(len(order))):
        total += unrestrictiveness(s, b, cfg) * w
        b = b | exposed_variables(s)
    return total


def _eligible(s: ServicePattern, bound: AbstractSet[str]) -> bool:
    var = s.endpoint_variable
    return var is None or var in bound


def _check_satisfiable(services: Sequence[ServicePattern], bound: AbstractSet[str]) -> None:
    for s in services:
        var = s.endpoint_variable
        if var is None or var in bound:
            continue
        if not any(var in exposed_variables(o) for o in services if o is not s):
            raise DependencyUnsatisfiable(
                f"SERVICE ?{var} (service #{s.original_index}) has no other pattern binding ?{var}"
            )
    # eligibility only grows with the bound set, so a greedy sweep finds an order iff one exists
    b = set(bound)
    remaining = list(services)
    while remaining:
        ready = [s for s in remaining if _eligible(s, b)]
        if not ready:
            names = ", ".join(f"#{s.original_index}" for s in remaining)
            raise DependencyUnsatisfiable(f"cyclic endpoint-variable dependencies among services {names}")
        for s in ready:
            b |= exposed_variables(s)
            remaining.remove(s)


def valid_orderings(
    segment: QuerySegment, bound: AbstractSet[str] = frozenset()
) -> Iterator[tuple[ServicePattern, ...]]:
    """Permutations in which every ``SERVICE ?v`` comes after a pattern binding ``?v``.

    ``bound`` holds variables already bound by earlier segments; an endpoint
    variable in it imposes no constraint.
    """
    services = segment.services
    _check_satisfiable(services, bound)
    n = len(services)
    exposed = [exposed_variables(s) for s in services]

    def extend(prefix: list[int], used: list[bool], b: frozenset[str]) -> Iterator[tuple[ServicePattern, ...]]:
        if len(prefix) == n:
            yield tuple(services[i] for i in prefix)
            return
        for i in range(n):
            if used[i] or not _eligible(services[i], b):
                continue
            used[i] = True
            prefix.append(i)
            yield from extend(prefix, used, b | exposed[i])
            prefix.pop()
            used[i] = False

    return extend([], [False] * n, frozenset(bound))


class _Coster:
    """Memoised unrestrictiveness for the services of one segment."""

    def __init__(self, services: Sequence[ServicePattern], cfg: CostConfig):
        self.services = services
        self.cfg = cfg
        self.exposed = [exposed_variables(s) for s in services]
        self.memo: dict[tuple[int, frozenset[str]], float] = {}

    def cost(self, i: int, bound: frozenset[str]) -> float:
        key = (i, bound & self.exposed[i])
        value = self.memo.get(key)
        if value is None:
            value = unrestrictiveness(self.services[i], key[1], self.cfg)
            self.memo[key] = value
        return value


@dataclass
class _SegmentPlan:
    order: tuple[int, ...]  # original indices
    table: tuple[tuple[tuple[int, ...], float], ...] | None = None
    notes: list[str] = field(default_factory=list)


def _pick_tied(candidates: list[tuple[int, ...]], tie: dict[int, int], notes: list[str]) -> tuple[int, ...]:
    """Prefer orders placing literal/filter-rich services first, then the input order."""
    if len(candidates) == 1:
        return candidates[0]
    by_score = min(candidates, key=lambda o: (tuple(-tie[i] for i in o), o))
    best_scores = tuple(tie[i] for i in by_score)
    if any(tuple(tie[i] for i in o) != best_scores for o in candidates):
        notes.append("tie-break-literals-filters")
    if sum(1 for o in candidates if tuple(tie[i] for i in o) == best_scores) > 1:
        notes.append("tie-break-original-order")
    return by_score


def _enumerate_segment(
    seg: QuerySegment, cfg: CostConfig, bound: frozenset[str], record_table: bool
) -> _SegmentPlan:
    services = seg.services
    _check_satisfiable(services, bound)
    n = len(services)
    weights = sequence_weights(n)
    coster = _Coster(services, cfg)
    orig = [s.original_index for s in services]
    table: list[tuple[tuple[int, ...], float]] = []
    best = math.inf
    prefix: list[int] = []
    used = [False] * n

    def extend(b: frozenset[str], acc: float) -> None:
        nonlocal best
        depth = len(prefix)
        if depth == n:
            table.append((tuple(orig[i] for i in prefix), acc))
            if acc < best:
                best = acc
            return
        w = weights[depth]
        for i in range(n):
            if used[i] or not _eligible(services[i], b):
                continue
            used[i] = True
            prefix.append(i)
            extend(b | coster.exposed[i], acc + coster.cost(i, b) * w)
            prefix.pop()
            used[i] = False

    extend(bound, 0.0)
    limit = best + TIE_TOLERANCE * max(1.0, abs(best))
    candidates = [o for o, c in table if c <= limit]
    tie = {s.original_index: tie_break_score(s) for s in services}
    notes: list[str] = []
    order = _pick_tied(candidates, tie, notes)
    return _SegmentPlan(order, tuple(table) if record_table else None, notes)


def _repair(ordered: Sequence[ServicePattern], bound: AbstractSet[str]) -> list[ServicePattern]:
    """Stable pass deferring each ``SERVICE ?v`` until something binds ``?v``."""
    out: list[ServicePattern] = []
    pending: list[ServicePattern] = []
    b = set(bound)
    for s in ordered:
        if not _eligible(s, b):
            pending.append(s)
            continue
        out.append(s)
        b |= exposed_variables(s)
        progress = True
        while progress:
            progress = False
            for p in pending:
                if _eligible(p, b):
                    pending.remove(p)
                    out.append(p)
                    b |= exposed_variables(p)
                    progress = True
                    break
    if pending:
        raise DependencyUnsatisfiable("no ordering satisfies the endpoint-variable dependencies")
    return out


def _sort_segment(seg: QuerySegment, cfg: CostConfig, bound: frozenset[str], record_table: bool) -> _SegmentPlan:
    services = seg.services
    _check_satisfiable(services, bound)
    costs = {s.original_index: unrestrictiveness(s, bound, cfg) for s in services}
    ranked = sorted(services, key=lambda s: (costs[s.original_index], -tie_break_score(s), s.original_index))
    b = set(bound)
    for s in ranked:
        if not _eligible(s, b):
            break
        b |= exposed_variables(s)
    else:
        return _SegmentPlan(tuple(s.original_index for s in ranked), notes=["vc-sort"])
    # the sorted order violates a dependency; sorting is no longer provably optimal
    if len(services) <= cfg.exhaustive_cap:
        plan = _enumerate_segment(seg, cfg, bound, record_table)
        plan.notes.insert(0, "vc-enumeration-fallback")
        return plan
    repaired = _repair(ranked, bound)
    return _SegmentPlan(tuple(s.original_index for s in repaired), notes=["vc-sort", "vc-dependency-repair"])


def greedy_order(
    services: Sequence[ServicePattern], cfg: CostConfig, bound: AbstractSet[str] = frozenset()
) -> list[ServicePattern]:
    """Repeatedly take the cheapest eligible service given what is bound so far."""
    remaining = list(services)
    b = frozenset(bound)
    out = []
    while remaining:
        eligible = [s for s in remaining if _eligible(s, b)]
        if not eligible:
            names = ", ".join(f"#{s.original_index}" for s in remaining)
            raise DependencyUnsatisfiable(f"no eligible service among {names}")
        costs = [unrestrictiveness(s, b, cfg) for s in eligible]
        low = min(costs)
        limit = low + TIE_TOLERANCE * max(1.0, abs(low))
        tied = [s for s, c in zip(eligible, costs) if c <= limit]
        pick = min(tied, key=lambda s: (-tie_break_score(s), s.original_index))
        out.append(pick)
        remaining.remove(pick)
        b = b | exposed_variables(pick)
    return out


def _greedy_segment(seg: QuerySegment, cfg: CostConfig, bound: frozenset[str], record_table: bool) -> _SegmentPlan:
    _check_satisfiable(seg.services, bound)
    return _SegmentPlan(tuple(s.original_index for s in greedy_order(seg.services, cfg, bound)))


def segment_by_optional(q: FederatedQuery) -> list[QuerySegment]:
    """Segments are fixed at parse time; reordering happens inside each one."""
    return list(q.segments)


def check_segments_preserved(before: FederatedQuery, after: FederatedQuery) -> None:
    if len(before.segments) != len(after.segments):
        raise AssertionError("segment count changed")
    for a, b in zip(before.segments, after.segments):
        if a.inside_optional != b.inside_optional or sorted(a.services, key=id) != sorted(b.services, key=id):
            raise AssertionError("a service moved across a segment boundary")


def _build(
    q: FederatedQuery, cfg: CostConfig, strategy: Strategy, planner, record_table: bool = True
) -> tuple[FederatedQuery, PlanReport]:
    segments = segment_by_optional(q)
    plans: list[_SegmentPlan] = []
    bounds: list[frozenset[str]] = []
    bound: frozenset[str] = frozenset()
    for seg in segments:
        bounds.append(bound)
        plans.append(planner(seg, cfg, bound, record_table))
        bound = bound_after(seg.services, bound)
    out = q.with_orders(p.order for p in plans)
    check_segments_preserved(q, out)

    constraints: list[str] = []
    if len(segments) > 1 or any(seg.inside_optional for seg in segments):
        constraints.append("optional-segmentation")
    if any(s.endpoint_variable is not None for s in q.services):
        constraints.append("endpoint-variable-dependency")
    for p in plans:
        constraints += [n for n in p.notes if n not in constraints]

    total = 0.0
    per_service = []
    for k, (seg, b0) in enumerate(zip(out.segments, bounds)):
        total += sequence_cost(seg.services, cfg, b0)
        b = b0
        for s in seg.services:
            per_service.append(
                ServiceCost(
                    s.original_index,
                    k,
                    unrestrictiveness(s, b0, cfg),
                    unrestrictiveness(s, b, cfg),
                    tie_break_score(s),
                )
            )
            b = b | exposed_variables(s)
    per_service.sort(key=lambda c: c.original_index)
    report = PlanReport(
        method=cfg.method,
        strategy=strategy,
        chosen_order=tuple(p.order for p in plans),
        chosen_cost=total,
        per_service_costs=tuple(per_service),
        permutation_tables=tuple(p.table for p in plans),
        constraints_applied=tuple(constraints),
    )
    return out, report


def exhaustive_plan(
    q: FederatedQuery, cfg: CostConfig, record_table: bool = True
) -> tuple[FederatedQuery, PlanReport]:
    """Minimum-cost order per segment over all valid permutations.

    VC costs do not depend on bindings, so VC sorts instead of enumerating
    whenever the sorted order already satisfies the endpoint dependencies.
    """
    if cfg.method is Method.VC:
        return _build(q, cfg, Strategy.SORT, _sort_segment, record_table)
    for seg in q.segments:
        if len(seg.services) > cfg.exhaustive_cap:
            raise ExhaustiveCapExceeded(
                f"segment has {len(seg.services)} services, above the exhaustive cap of "
                f"{cfg.exhaustive_cap}; use the greedy strategy"
            )
    return _build(q, cfg, Strategy.EXHAUSTIVE, _enumerate_segment, record_table)


def greedy_plan(q: FederatedQuery, cfg: CostConfig) -> tuple[FederatedQuery, PlanReport]:
    return _build(q, cfg, Strategy.GREEDY, _greedy_segment, False)


def plan(
    q: FederatedQuery, cfg: CostConfig, strategy: str = "auto", record_table: bool = True
) -> tuple[FederatedQuery, PlanReport]:
    """Dispatch on ``"exhaustive"``, ``"greedy"`` or ``"auto"``.

    ``auto`` is exhaustive when every segment fits ``cfg.exhaustive_cap``.
    """
    if strategy == "auto":
        fits = cfg.method is Method.VC or all(len(seg.services) <= cfg.exhaustive_cap for seg in q.segments)
        strategy = "exhaustive" if fits else "greedy"
    if strategy == "exhaustive":
        return exhaustive_plan(q, cfg, record_table)
    if strategy == "greedy":
        return greedy_plan(q, cfg)
    raise ValueError(f"unknown strategy {strategy!r}")
