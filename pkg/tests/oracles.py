"""Brute-force reference implementations, written against the data model only.

Nothing here imports the cost or planner modules, so agreement with them is
evidence rather than tautology.
"""

from __future__ import annotations

import itertools
import math

from fedreorder.model import FederatedQuery, ServicePattern, Term, TermKind

WEIGHTS = {"subject": 1.0, "predicate": 0.1, "object": 0.8}
JOIN_FACTORS = {"star": 0.5, "chain": 0.6, "unusual": 1.0}


def _is_var(t: Term) -> bool:
    return t.kind is TermKind.VARIABLE


def _var_name(t: Term) -> str:
    return t.lexical[1:]


def occurrences(s: ServicePattern) -> dict[str, set[str]]:
    """Variable name -> roles ("subject"/"predicate"/"object") it fills."""
    out: dict[str, set[str]] = {}
    for t in s.triples:
        for role, term in (("subject", t.subject), ("predicate", t.predicate), ("object", t.object)):
            if _is_var(term):
                out.setdefault(_var_name(term), set()).add(role)
    return out


def exposed(s: ServicePattern) -> set[str]:
    if s.sub_select is not None:
        return set(s.sub_select.projection)
    names = set(occurrences(s))
    if s.endpoint.kind is TermKind.VARIABLE:
        names.add(_var_name(s.endpoint))
    return names


def cost_variables(s: ServicePattern) -> dict[str, set[str]]:
    occ = occurrences(s)
    names = exposed(s)
    if s.endpoint.kind is TermKind.VARIABLE:
        ep = _var_name(s.endpoint)
        if ep not in occ:
            names.discard(ep)
    return {v: occ.get(v, set()) for v in names}


def role_weight(roles: set[str], weights: dict[str, float]) -> float:
    for role in ("predicate", "object", "subject"):
        if role in roles:
            return weights[role]
    return weights["subject"]


def join_counts(s: ServicePattern) -> dict[str, int]:
    slots: list[tuple[int, str, str]] = []
    for i, t in enumerate(s.triples):
        for role, term in (("subject", t.subject), ("predicate", t.predicate), ("object", t.object)):
            if term.kind in (TermKind.VARIABLE, TermKind.BLANK_NODE):
                slots.append((i, role, term.lexical.lstrip("?$")))
    counts = {"star": 0, "chain": 0, "unusual": 0}
    for a in range(len(slots)):
        for b in range(a + 1, len(slots)):
            (ti, ra, na), (tj, rb, nb) = slots[a], slots[b]
            if na != nb or ti == tj:
                continue
            if "predicate" in (ra, rb):
                counts["unusual"] += 1
            elif ra == rb:
                counts["star"] += 1
            else:
                counts["chain"] += 1
    return counts


def cost(
    s: ServicePattern,
    bound: set[str] | frozenset[str],
    method: str,
    weights: dict[str, float] = WEIGHTS,
    factors: dict[str, float] = JOIN_FACTORS,
) -> float:
    variables = cost_variables(s)
    if method == "VC":
        return float(len(variables))
    free = {v: r for v, r in variables.items() if v not in bound}
    if method == "UVC":
        return float(len(free))
    numerator = sum(role_weight(r, weights) for r in free.values())
    if method == "WUVC":
        return numerator
    j = join_counts(s)
    return numerator / (1 + sum(j[k] * factors[k] for k in j))


def sequence_cost(order: list[ServicePattern], method: str, bound: set[str] = frozenset(), **kw) -> float:
    n = len(order)
    b = set(bound)
    total = 0.0
    for i, s in enumerate(order, 1):
        total += cost(s, b, method, **kw) * (n - i + 1) / n
        b |= exposed(s)
    return total


def dependency_ok(order: list[ServicePattern], bound: set[str] = frozenset()) -> bool:
    b = set(bound)
    for s in order:
        if s.endpoint.kind is TermKind.VARIABLE and _var_name(s.endpoint) not in b:
            return False
        b |= exposed(s)
    return True


def segment_orders(services: tuple[ServicePattern, ...], bound: set[str]) -> list[list[ServicePattern]]:
    return [list(p) for p in itertools.permutations(services) if dependency_ok(list(p), bound)]


def brute_force_minimum(q: FederatedQuery, method: str, **kw) -> float:
    """Sum over segments of the cheapest valid permutation's cost."""
    total = 0.0
    bound: set[str] = set()
    for seg in q.segments:
        orders = segment_orders(seg.services, bound)
        if not orders:
            return math.inf
        total += min(sequence_cost(o, method, bound, **kw) for o in orders)
        for s in seg.services:
            bound |= exposed(s)
    return total
