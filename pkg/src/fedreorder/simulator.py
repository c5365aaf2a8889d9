"""In-memory federation that executes SERVICE sequences as bind joins.

A *call* is one remote evaluation: a constant endpoint is called once per
distinct projection of the current solutions onto the service's variables,
a ``SERVICE ?v`` block once per distinct value of ``?v``. Comparing call
counts across orderings gives a ground truth for the syntactic estimates.
"""

from __future__ import annotations

import itertools
import json
import re
import time
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from os import PathLike
from pathlib import Path
from typing import Callable, NamedTuple

from .model import FederatedQuery, ServicePattern, Term, TermKind, bound_after
from .ntriples import (
    NUMERIC_TYPES,
    RDF_TYPE,
    XSD,
    Triple,
    make_literal,
    parse_ntriples,
    split_literal,
    unescape,
)
from .parser import prologue_prefixes
from .planner import valid_orderings

Solution = dict[str, str]
Order = tuple[tuple[int, ...], ...]


class SimulationError(Exception):
    pass


class UnknownEndpoint(SimulationError):
    pass


class UnsupportedFilter(SimulationError):
    pass


class FederationError(SimulationError):
    pass


class SimulationLimitExceeded(SimulationError):
    pass


class TripleStore:
    """Set of ground triples with lazily built lookup indexes."""

    def __init__(self, endpoint_iri: str, triples: Iterable[Triple] = ()):
        self.endpoint_iri = endpoint_iri
        self.triples: frozenset[Triple] = frozenset(triples)
        self._indexes: dict[tuple[bool, bool, bool], dict[tuple[str, ...], list[Triple]]] = {}

    def __len__(self) -> int:
        return len(self.triples)

    def lookup(self, s: str | None, p: str | None, o: str | None) -> Sequence[Triple]:
        mask = (s is not None, p is not None, o is not None)
        if mask == (False, False, False):
            return tuple(self.triples)
        index = self._indexes.get(mask)
        if index is None:
            index = {}
            for t in sorted(self.triples):
                index.setdefault(tuple(x for x, keep in zip(t, mask) if keep), []).append(t)
            self._indexes[mask] = index
        key = tuple(x for x in (s, p, o) if x is not None)
        return index.get(key, ())


@dataclass
class Federation:
    stores: dict[str, TripleStore] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for iri, store in self.stores.items():
            if iri != store.endpoint_iri:
                raise FederationError(f"store key {iri!r} != endpoint {store.endpoint_iri!r}")

    @classmethod
    def from_triples(cls, data: Mapping[str, Iterable[Triple]]) -> Federation:
        return cls({iri: TripleStore(iri, triples) for iri, triples in data.items()})

    def get(self, iri: str) -> TripleStore | None:
        return self.stores.get(_strip_brackets(iri))


def _strip_brackets(iri: str) -> str:
    return iri[1:-1] if iri.startswith("<") and iri.endswith(">") else iri


def load_federation(manifest_path: str | PathLike[str]) -> Federation:
    """Load a JSON manifest mapping endpoint IRIs to N-Triples files."""
    path = Path(manifest_path)

    def no_duplicates(pairs: list[tuple[str, object]]) -> dict:
        seen: dict[str, object] = {}
        for key, value in pairs:
            if key in seen:
                raise FederationError(f"{path}: duplicate endpoint {key!r} in manifest")
            seen[key] = value
        return seen

    with open(path, encoding="utf-8") as fh:
        try:
            manifest = json.load(fh, object_pairs_hook=no_duplicates)
        except json.JSONDecodeError as exc:
            raise FederationError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(manifest, dict):
        raise FederationError(f"{path}: manifest must be a JSON object")
    stores = {}
    for iri, rel in manifest.items():
        if not isinstance(rel, str):
            raise FederationError(f"{path}: path for {iri!r} must be a string")
        iri = _strip_brackets(iri)
        data_path = path.parent / rel
        try:
            with open(data_path, encoding="utf-8") as fh:
                triples = list(parse_ntriples(fh, str(data_path)))
        except OSError as exc:
            raise FederationError(f"cannot read {data_path}: {exc.strerror}") from None
        stores[iri] = TripleStore(iri, triples)
    return Federation(stores)


# --- query terms -> ground terms ---------------------------------------------------------

_NUMBER_TYPES = [
    (re.compile(r"[+-]?\d+"), "integer"),
    (re.compile(r"[+-]?\d*\.\d+"), "decimal"),
]


def ground_term(term: Term, prefixes: Mapping[str, str]) -> str:
    kind = term.kind
    lex = term.lexical
    if kind is TermKind.IRI:
        return lex
    if kind is TermKind.KEYWORD_A:
        return RDF_TYPE
    if kind is TermKind.PREFIXED_NAME:
        return _expand_pname(lex, prefixes)
    if kind is TermKind.LITERAL:
        return _ground_literal(lex, prefixes)
    raise ValueError(f"{lex!r} is not a constant")


def _expand_pname(pname: str, prefixes: Mapping[str, str]) -> str:
    prefix, _, local = pname.partition(":")
    if prefix not in prefixes:
        raise SimulationError(f"undeclared prefix {prefix + ':'!r}")
    local = re.sub(r"\\(.)", r"\1", local)
    return f"<{prefixes[prefix]}{local}>"


def _ground_literal(lex: str, prefixes: Mapping[str, str]) -> str:
    if lex in ("true", "false"):
        return make_literal(lex, datatype=f"<{XSD}boolean>")
    if lex[0] not in "\"'":
        for pattern, dtype in _NUMBER_TYPES:
            if pattern.fullmatch(lex):
                return make_literal(lex, datatype=f"<{XSD}{dtype}>")
        return make_literal(lex, datatype=f"<{XSD}double>")
    quote = lex[:3] if lex[:3] in ('"""', "'''") else lex[0]
    end = lex.rindex(quote)
    value = unescape(lex[len(quote) : end])
    suffix = lex[end + len(quote) :]
    if suffix.startswith("@"):
        return make_literal(value, lang=suffix[1:])
    if suffix.startswith("^^"):
        dt = suffix[2:]
        dt = dt if dt.startswith("<") else _expand_pname(dt, prefixes)
        return make_literal(value, datatype=dt)
    return make_literal(value)


# --- filters -----------------------------------------------------------------------------

_TERM = (
    r"[?$]\w+|<[^<>\"\s]*>"
    r'|"(?:[^"\\]|\\.)*"(?:@[A-Za-z\-]+|\^\^\S+?)?'
    r"|'(?:[^'\\]|\\.)*'(?:@[A-Za-z\-]+|\^\^\S+?)?"
    r"|[+-]?(?:\d*\.\d+|\d+)(?:[eE][+-]?\d+)?|true|false|[A-Za-z][\w\-.]*:[\w\-.]*|:[\w\-.]*"
)
_COMPARE_RE = re.compile(rf"\(\s*(?P<l>{_TERM})\s*(?P<op>!=|<=|>=|=|<|>)\s*(?P<r>{_TERM})\s*\)")
_REGEX_RE = re.compile(
    r"\(?\s*regex\s*\(\s*(?P<var>[?$]\w+)\s*,\s*(?P<pat>\"(?:[^\"\\]|\\.)*\"|'(?:[^'\\]|\\.)*')\s*\)\s*\)?",
    re.IGNORECASE,
)
_FLIP = {"<": ">", ">": "<", "<=": ">=", ">=": "<=", "=": "=", "!=": "!="}


def _numeric(term: str) -> Decimal | None:
    if not term.startswith('"'):
        return None
    value, _, dtype = split_literal(term)
    if dtype not in NUMERIC_TYPES and dtype not in (f"<{XSD}decimal>", f"<{XSD}double>", f"<{XSD}float>"):
        return None
    try:
        return Decimal(value)
    except InvalidOperation:
        return None


def _lexical(term: str) -> str:
    if term.startswith('"'):
        return split_literal(term)[0]
    return _strip_brackets(term)


def _compare(left: str, op: str, right: str) -> bool:
    a, b = _numeric(left), _numeric(right)
    if op in ("=", "!="):
        equal = a == b if a is not None and b is not None else left == right
        return equal if op == "=" else not equal
    if a is None or b is None:
        if not (left.startswith('"') and right.startswith('"')):
            return False
        la, lang_a, dt_a = split_literal(left)
        lb, lang_b, dt_b = split_literal(right)
        if dt_a or dt_b or lang_a != lang_b:
            return False
        a, b = la, lb  # type: ignore[assignment]
    return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]  # type: ignore[operator]


def compile_filter(body: str, prefixes: Mapping[str, str]) -> Callable[[Solution], bool]:
    """Turn a supported FILTER expression into a predicate over solutions."""
    text = body.strip()
    m = _REGEX_RE.fullmatch(text)
    if m:
        var = m.group("var")[1:]
        needle = unescape(m.group("pat")[1:-1])
        return lambda mu: var in mu and needle in _lexical(mu[var])
    m = _COMPARE_RE.fullmatch(text)
    if m:
        left, op, right = m.group("l"), m.group("op"), m.group("r")
        if left[0] in "?$" and right[0] not in "?$":
            var, const = left[1:], right
        elif right[0] in "?$" and left[0] not in "?$":
            var, const, op = right[1:], left, _FLIP[op]
        else:
            raise UnsupportedFilter(f"FILTER must compare a variable with a constant: {body}")
        value = _ground_constant(const, prefixes)
        return lambda mu: var in mu and _compare(mu[var], op, value)
    raise UnsupportedFilter(f"unsupported FILTER expression: {body}")


def _ground_constant(text: str, prefixes: Mapping[str, str]) -> str:
    if text.startswith("<"):
        return text
    if text[0] in "\"'" or text[0] in "+-.0123456789" or text in ("true", "false"):
        return _ground_literal(text, prefixes)
    return _expand_pname(text, prefixes)


# --- evaluation --------------------------------------------------------------------------


@dataclass
class _CompiledService:
    service: ServicePattern
    patterns: list[tuple[str, str, str]]  # variables prefixed with '?'
    variables: frozenset[str]
    filters: list[Callable[[Solution], bool]]


def _compile_service(s: ServicePattern, prefixes: Mapping[str, str]) -> _CompiledService:
    if s.sub_select is not None:
        raise SimulationError(f"service #{s.original_index}: sub-select bodies are not simulated")

    def enc(t: Term) -> str:
        if t.kind in (TermKind.VARIABLE, TermKind.BLANK_NODE):
            return "?" + t.name
        return ground_term(t, prefixes)

    patterns = [(enc(t.subject), enc(t.predicate), enc(t.object)) for t in s.triples]
    filters = [compile_filter(f, prefixes) for f in s.filters]
    return _CompiledService(s, patterns, frozenset(s.triple_variables()), filters)


def _match(store: TripleStore | None, patterns: list[tuple[str, str, str]], init: Solution) -> list[Solution]:
    if store is None:
        return []
    out: list[Solution] = []

    def value(x: str, mu: Solution) -> str | None:
        if x[0] == "?":
            return mu.get(x[1:])
        return x

    def rec(remaining: list[tuple[str, str, str]], mu: Solution) -> None:
        if not remaining:
            out.append(mu)
            return
        k = max(range(len(remaining)), key=lambda j: sum(value(x, mu) is not None for x in remaining[j]))
        pat = remaining[k]
        rest = remaining[:k] + remaining[k + 1 :]
        s, p, o = (value(x, mu) for x in pat)
        for triple in store.lookup(s, p, o):
            new = mu
            ok = True
            for x, v in zip(pat, triple):
                if x[0] != "?":
                    continue
                name = x[1:]
                have = new.get(name)
                if have is None:
                    if new is mu:
                        new = dict(mu)
                    new[name] = v
                elif have != v:
                    ok = False
                    break
            if ok:
                rec(rest, new)

    rec(list(patterns), dict(init))
    return out


def _strip_bnodes(mu: Solution) -> Solution:
    if any(k.startswith("_:") for k in mu):
        return {k: v for k, v in mu.items() if not k.startswith("_:")}
    return mu


@dataclass
class SimulationResult:
    solutions: list[Solution] | None
    solution_count: int
    per_service_calls: list[tuple[int, int]]
    intermediate_sizes: list[int]
    wall_time: float

    @property
    def total_calls(self) -> int:
        return sum(c for _, c in self.per_service_calls)

    def solution_multiset(self) -> Counter:
        if self.solutions is None:
            raise ValueError("solutions were not kept")
        return Counter(frozenset(mu.items()) for mu in self.solutions)


Weighted = list[tuple[Solution, int]]
_PARENT = "\0parent"


class _Evaluator:
    """Bind-join steps over solutions carrying multiplicities.

    With ``keep`` set, every produced solution is projected onto those
    variables and duplicates are merged, which leaves call counts and
    intermediate sizes unchanged while collapsing cross products.
    """

    def __init__(self, fed: Federation, cache: dict | None, max_solutions: int | None):
        self.fed = fed
        self.cache = {} if cache is None else cache
        self.max_solutions = max_solutions

    def remote(self, cs: _CompiledService, store: TripleStore | None, init: Solution, key: tuple) -> list[Solution]:
        cache_key = (cs.service.original_index, key)
        hit = self.cache.get(cache_key)
        if hit is None:
            found = _match(store, cs.patterns, init)
            hit = [_strip_bnodes(mu) for mu in found if all(f(mu) for f in cs.filters)]
            self.cache[cache_key] = hit
        return hit

    def step(self, omega: Weighted, cs: _CompiledService, keep: frozenset[str] | None) -> tuple[Weighted, int]:
        s = cs.service
        out = _Sink(keep, self.max_solutions)
        var = s.endpoint_variable
        groups: dict[tuple, Weighted] = {}
        if var is None:
            store = self.fed.get(s.endpoint.lexical)
            for mu, m in omega:
                key = tuple(sorted((v, mu[v]) for v in cs.variables if v in mu))
                groups.setdefault(key, []).append((mu, m))
            calls = max(1, len(groups))
            for key, members in groups.items():
                out.join(members, self.remote(cs, store, dict(key), key))
        else:
            endpoints: set[str] = set()
            for mu, m in omega:
                if var in mu:
                    endpoints.add(mu[var])
                    key = tuple(sorted((v, mu[v]) for v in cs.variables | {var} if v in mu))
                    groups.setdefault(key, []).append((mu, m))
            calls = len(endpoints)
            for key, members in groups.items():
                fixed = dict(key)
                iri = fixed[var]
                init = {var: iri} if var in cs.variables else {}
                results = self.remote(cs, self.fed.get(iri), init, ("@endpoint", iri))
                out.join(members, [r for r in results if all(fixed.get(k, v) == v for k, v in r.items())])
        return out.items(), calls


class _Sink:
    """Collects join output, optionally projected onto ``keep`` with merged duplicates."""

    def __init__(self, keep: frozenset[str] | None, limit: int | None):
        self.order = None if keep is None else tuple(sorted(keep))
        self.limit = limit
        self.rows: Weighted = []
        self.merged: dict[tuple, int] = {}

    def _size_check(self, size: int) -> None:
        if self.limit is not None and size > self.limit:
            raise SimulationLimitExceeded(f"more than {self.limit} intermediate solutions")

    def _key(self, mu: Solution) -> tuple:
        return tuple(mu.get(v) for v in self.order)

    def join(self, members: Weighted, results: list[Solution]) -> None:
        """Add every compatible ``mu`` ∪ ``r``; members and results already agree on shared variables."""
        if not results:
            return
        if self.order is None:
            for r in results:
                for mu, m in members:
                    self.rows.append(({**mu, **r}, m))
                self._size_check(len(self.rows))
            return
        left: dict[tuple, int] = {}
        for mu, m in members:
            k = self._key(mu)
            left[k] = left.get(k, 0) + m
        right: dict[tuple, int] = {}
        for r in results:
            k = self._key(r)
            right[k] = right.get(k, 0) + 1
        for lk, lm in left.items():
            for rk, rm in right.items():
                k = tuple(a if a is not None else b for a, b in zip(lk, rk))
                self.merged[k] = self.merged.get(k, 0) + lm * rm
            self._size_check(len(self.merged))

    def add(self, mu: Solution, m: int) -> None:
        if self.order is None:
            self.rows.append((mu, m))
            self._size_check(len(self.rows))
        else:
            k = self._key(mu)
            self.merged[k] = self.merged.get(k, 0) + m
            self._size_check(len(self.merged))

    def items(self) -> Weighted:
        if self.order is None:
            return self.rows
        names = self.order
        return [({v: x for v, x in zip(names, k) if x is not None}, m) for k, m in self.merged.items()]


def _project(omega: Weighted, keep: frozenset[str] | None) -> Weighted:
    if keep is None:
        return omega
    sink = _Sink(keep, None)
    for mu, m in omega:
        sink.add(mu, m)
    return sink.items()


def _total(omega: Weighted) -> int:
    return sum(m for _, m in omega)


def _needed_after(services: Sequence[ServicePattern]) -> list[frozenset[str]]:
    """``out[k]``: variables read by services ``k`` onwards."""
    out = [frozenset()]
    for s in reversed(services):
        own = set(s.triple_variables())
        if s.endpoint_variable is not None:
            own.add(s.endpoint_variable)
        out.append(out[-1] | own)
    return out[::-1]


def _compile_query(q: FederatedQuery, fed: Federation) -> dict[int, _CompiledService]:
    prefixes = prologue_prefixes(q.prologue)
    compiled = {}
    for s in q.services:
        if s.endpoint_variable is None:
            iri = ground_term(s.endpoint, prefixes)
            if fed.get(iri) is None:
                raise UnknownEndpoint(f"endpoint {iri} is not in the federation")
            if s.endpoint.kind is TermKind.PREFIXED_NAME:
                s = ServicePattern(
                    Term(TermKind.IRI, iri), s.triples, s.filters, s.silent, s.sub_select, s.original_index
                )
        compiled[s.original_index] = _compile_service(s, prefixes)
    return compiled


def evaluate_sequence(
    q: FederatedQuery,
    fed: Federation,
    *,
    keep_solutions: bool = True,
    cache: dict | None = None,
    max_solutions: int | None = None,
    _compiled: dict[int, _CompiledService] | None = None,
) -> SimulationResult:
    """Run the query's SERVICE blocks left to right as bind joins.

    ``cache`` may be shared between evaluations of reorderings of the same
    query and federation; it memoises remote results, never call counts.
    Without ``keep_solutions`` only counts are tracked, so solutions are
    projected onto the variables later blocks still read. ``max_solutions``
    bounds the number of distinct rows held at once.
    """
    started = time.perf_counter()
    compiled = _compiled if _compiled is not None else _compile_query(q, fed)
    ev = _Evaluator(fed, cache, max_solutions)
    flat = q.services
    needed = _needed_after(flat)

    def keep(k: int, extra: frozenset[str] = frozenset()) -> frozenset[str] | None:
        return None if keep_solutions else needed[k] | extra

    omega: Weighted = [({}, 1)]
    calls: list[tuple[int, int]] = []
    sizes: list[int] = []
    k = 0
    for seg in q.segments:
        if not seg.inside_optional:
            for s in seg.services:
                k += 1
                omega, n = ev.step(omega, compiled[s.original_index], keep(k))
                calls.append((s.original_index, n))
                sizes.append(_total(omega))
            continue
        # left outer join: run the group on tagged copies, keep parents without matches
        tag = frozenset({_PARENT})
        inner: Weighted = [({**mu, _PARENT: str(i)}, 1) for i, (mu, _) in enumerate(omega)]
        for j, s in enumerate(seg.services):
            k += 1
            inner, n = ev.step(inner, compiled[s.original_index], keep(k, tag))
            calls.append((s.original_index, n))
            if j < len(seg.services) - 1:
                sizes.append(_total(inner))
        children: dict[int, Weighted] = {}
        for mu, m in inner:
            mu = dict(mu)
            parent = int(mu.pop(_PARENT))
            children.setdefault(parent, []).append((mu, m))
        joined: Weighted = []
        for i, (mu, m) in enumerate(omega):
            joined.extend((r, m * c) for r, c in children.get(i, [(mu, 1)]))
        omega = _project(joined, keep(k))
        sizes.append(_total(omega))
    return SimulationResult(
        solutions=[mu for mu, _ in omega] if keep_solutions else None,
        solution_count=_total(omega),
        per_service_calls=calls,
        intermediate_sizes=sizes,
        wall_time=time.perf_counter() - started,
    )


class OptimalOrder(NamedTuple):
    order: Order
    total_calls: int


def all_valid_orders(q: FederatedQuery) -> list[Order]:
    per_segment = []
    bound: frozenset[str] = frozenset()
    for seg in q.segments:
        per_segment.append([tuple(s.original_index for s in o) for o in valid_orderings(seg, bound)])
        bound = bound_after(seg.services, bound)
    return [tuple(combo) for combo in itertools.product(*per_segment)]


def simulate_orderings(
    q: FederatedQuery, fed: Federation, cap: int = 9, max_solutions: int | None = None
) -> dict[Order, SimulationResult]:
    """Evaluate every valid ordering (solutions are not kept)."""
    for seg in q.segments:
        if len(seg.services) > cap:
            raise SimulationError(f"segment of {len(seg.services)} services exceeds the cap of {cap}")
    compiled = _compile_query(q, fed)
    cache: dict = {}
    return {
        order: evaluate_sequence(
            q.with_orders(order), fed, keep_solutions=False, cache=cache,
            max_solutions=max_solutions, _compiled=compiled,
        )
        for order in all_valid_orders(q)
    }


def best_order(results: Mapping[Order, SimulationResult]) -> OptimalOrder:
    order = min(results, key=lambda o: (results[o].total_calls, sum(results[o].intermediate_sizes), o))
    return OptimalOrder(order, results[order].total_calls)


def simulated_optimal(q: FederatedQuery, fed: Federation, cap: int = 9) -> OptimalOrder:
    """Ordering with the fewest calls; ties by fewer intermediates, then input order."""
    return best_order(simulate_orderings(q, fed, cap))
