"""Seeded synthetic queries and federations.

Two families:

* purely syntactic SERVICE patterns and queries, for planner properties and
  planning-time sweeps;
* (query, federation) instances whose patterns are cut from the generated
  data, so most services match something and joins are not trivially empty.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .model import FederatedQuery, QuerySegment, ServicePattern, Term, TermKind, TriplePattern
from .ntriples import XSD, make_literal
from .parser import serialize_query
from .simulator import Federation

EX = "http://ex.org/"
PREFIX = f"PREFIX ex: <{EX}>"
LINK = f"<{EX}source>"
LABEL = f"<{EX}label>"


# --- syntactic generators ----------------------------------------------------------------


def random_term(rng: random.Random, role: str, var_pool: int = 5) -> Term:
    r = rng.random()
    if r < 0.55:
        return Term.var(f"v{rng.randrange(var_pool)}")
    if role == "predicate":
        return Term(TermKind.PREFIXED_NAME, f"ex:p{rng.randrange(6)}") if r < 0.95 else Term(TermKind.KEYWORD_A, "a")
    if role == "object" and r < 0.75:
        if rng.random() < 0.5:
            return Term(TermKind.LITERAL, f'"lit{rng.randrange(9)}"')
        return Term(TermKind.LITERAL, str(rng.randrange(100)))
    if r < 0.8:
        return Term(TermKind.PREFIXED_NAME, f"ex:e{rng.randrange(20)}")
    return Term.iri(f"{EX}e{rng.randrange(20)}")


def random_service(
    rng: random.Random,
    index: int = 0,
    max_triples: int = 6,
    var_pool: int = 5,
    endpoint: Term | None = None,
) -> ServicePattern:
    triples = tuple(
        TriplePattern(
            random_term(rng, "subject", var_pool),
            random_term(rng, "predicate", var_pool),
            random_term(rng, "object", var_pool),
        )
        for _ in range(rng.randint(1, max_triples))
    )
    filters = tuple(f"(?v{rng.randrange(var_pool)} > {rng.randrange(50)})" for _ in range(rng.choice((0, 0, 0, 1, 2))))
    if endpoint is None:
        endpoint = Term.iri(f"{EX}endpoint{index}")
    return ServicePattern(endpoint, triples, filters, original_index=index)


def random_query(
    rng: random.Random,
    n_services: int,
    max_triples: int = 4,
    var_pool: int | None = None,
    p_var_endpoint: float = 0.0,
    p_optional: float = 0.0,
) -> FederatedQuery:
    """A syntactically random query; ``SERVICE ?v`` only names a variable some earlier block exposes."""
    pool = var_pool if var_pool is not None else max(3, n_services + 2)
    services: list[ServicePattern] = []
    for i in range(n_services):
        endpoint = None
        if services and rng.random() < p_var_endpoint:
            candidates = sorted({v for s in services for v in s.triple_variables()})
            if candidates:
                endpoint = Term.var(rng.choice(candidates))
        services.append(random_service(rng, i, max_triples, pool, endpoint))
    segments: list[QuerySegment] = []
    current: list[ServicePattern] = []
    for s in services:
        if current and rng.random() < p_optional:
            segments.append(QuerySegment(tuple(current)))
            segments.append(QuerySegment((s,), inside_optional=True))
            current = []
        else:
            current.append(s)
    if current:
        segments.append(QuerySegment(tuple(current)))
    return FederatedQuery(PREFIX, "*", tuple(segments))


# --- data-backed instances ---------------------------------------------------------------


@dataclass(frozen=True)
class WorkloadParams:
    min_services: int = 2
    max_services: int = 5
    min_triples: int = 100
    max_triples: int = 10_000
    p_var_endpoint: float = 0.15
    p_literal_predicate: float = 0.3
    p_filter: float = 0.2
    p_optional: float = 0.0


@dataclass
class Instance:
    seed: int
    query: FederatedQuery
    federation: Federation

    @property
    def query_text(self) -> str:
        return serialize_query(self.query)


class _StoreData:
    def __init__(self, rng: random.Random, j: int, n_entities: int, size: int, params: WorkloadParams):
        self.iri = f"{EX}endpoint{j}"
        n_preds = rng.randint(2, 6)
        self.predicates = [f"<{EX}s{j}/p{m}>" for m in range(n_preds)]
        self.literal_valued = {p for p in self.predicates if rng.random() < params.p_literal_predicate}
        weights = [rng.random() ** 2 + 0.05 for _ in self.predicates]
        triples: set[tuple[str, str, str]] = set()
        for p in self.predicates:
            triples.add((p, LABEL, make_literal(f"label {p[-3:-1]}")))
        attempts = 0
        while len(triples) < size and attempts < size * 4:
            attempts += 1
            p = rng.choices(self.predicates, weights)[0]
            s = _entity(rng, n_entities)
            if p in self.literal_valued:
                o = make_literal(str(rng.randrange(100)), datatype=f"<{XSD}integer>")
            else:
                o = _entity(rng, n_entities)
            triples.add((s, p, o))
        self.triples = triples
        self.by_subject: dict[str, list[tuple[str, str, str]]] = {}
        for t in sorted(triples):
            self.by_subject.setdefault(t[0], []).append(t)
        self.data_triples = sorted(t for t in triples if t[1] != LABEL)


def _entity(rng: random.Random, n_entities: int) -> str:
    # skewed popularity: low ids are hubs
    return f"<{EX}e{int(n_entities * rng.random() ** 2)}>"


def _as_term(value: str) -> Term:
    if value.startswith("<"):
        if value.startswith(f"<{EX}"):
            return Term(TermKind.PREFIXED_NAME, "ex:" + value[len(EX) + 1 : -1].replace("/", "_"))
        return Term.iri(value)
    lexical = value.split('"')[1]
    if value.endswith(f"<{XSD}integer>"):
        return Term(TermKind.LITERAL, lexical)
    return Term(TermKind.LITERAL, f'"{lexical}"')


class _QueryBuilder:
    def __init__(self, rng: random.Random, params: WorkloadParams):
        self.rng = rng
        self.params = params
        self.entity_vars: list[str] = []
        self.counter = 0

    def fresh(self, prefix: str = "v") -> str:
        self.counter += 1
        return f"{prefix}{self.counter}"

    def entity_slot(self, value: str, must_share: bool, prior: list[str]) -> Term:
        """Variable (possibly shared with an earlier service) or the witnessed constant."""
        rng = self.rng
        if must_share and prior:
            return Term.var(rng.choice(prior))
        r = rng.random()
        if not self.entity_vars:
            r = 0.5  # the first slot is always a variable, so later services can join on it
        if r < 0.3 and self.entity_vars:
            return Term.var(rng.choice(self.entity_vars))
        if r < 0.75:
            name = self.fresh()
            self.entity_vars.append(name)
            return Term.var(name)
        return _as_term(value)

    def service(self, store: _StoreData, index: int, connect: bool) -> tuple[list[TriplePattern], list[str]]:
        rng = self.rng
        witness = rng.choice(store.data_triples)
        shape = rng.choices(["single", "star", "chain", "unusual"], [0.35, 0.3, 0.25, 0.1])[0]
        parts = [witness]
        if shape == "star":
            siblings = [t for t in store.by_subject.get(witness[0], []) if t != witness]
            if siblings:
                parts.append(rng.choice(siblings))
        elif shape == "chain":
            nxt = store.by_subject.get(witness[2], [])
            nxt = [t for t in nxt if t[1] != LABEL]
            if nxt:
                parts.append(rng.choice(nxt))
        triples: list[TriplePattern] = []
        filters: list[str] = []
        slots: dict[str, Term] = {}
        prior = list(self.entity_vars)
        shared_done = not connect
        for k, (s, p, o) in enumerate(parts):
            if s not in slots:
                slots[s] = self.entity_slot(s, not shared_done, prior)
                shared_done = shared_done or (slots[s].is_variable and slots[s].name in prior)
            subj = slots[s]
            pred = _as_term(p)
            if shape == "unusual" and k == 0:
                pred = Term.var(self.fresh("p"))
            if p in store.literal_valued:
                if rng.random() < 0.6:
                    lit_var = self.fresh("n")
                    obj = Term.var(lit_var)
                    if rng.random() < self.params.p_filter:
                        filters.append(f"(?{lit_var} < {rng.randrange(20, 100)})")
                else:
                    obj = _as_term(o)
            else:
                if o not in slots:
                    slots[o] = self.entity_slot(o, not shared_done, prior)
                    shared_done = shared_done or (slots[o].is_variable and slots[o].name in prior)
                obj = slots[o]
            triples.append(TriplePattern(subj, pred, obj))
        if shape == "unusual":
            triples.append(TriplePattern(triples[0].predicate, _as_term(LABEL), Term.var(self.fresh("l"))))
        if not shared_done and prior:
            # no entity slot took a shared variable: attach one through a star edge
            anchor = triples[0].subject
            if anchor.is_variable:
                triples.append(TriplePattern(anchor, _as_term(store.predicates[0]), Term.var(rng.choice(prior))))
            else:
                triples.append(TriplePattern(Term.var(rng.choice(prior)), _as_term(store.predicates[0]), anchor))
        # two witness triples can abstract to the same pattern
        return list(dict.fromkeys(triples)), filters


def _prefixed_store_terms(triples: set[tuple[str, str, str]]) -> list[tuple[str, str, str]]:
    # the query abbreviates ex:s1/p0 as ex:s1_p0, so the data uses the same IRI
    def fix(x: str) -> str:
        if x.startswith(f"<{EX}"):
            return "<" + EX + x[len(EX) + 1 : -1].replace("/", "_") + ">"
        return x

    return [(fix(s), fix(p), fix(o)) for s, p, o in triples]


def generate_instance(seed: int, params: WorkloadParams = WorkloadParams(), n_services: int | None = None) -> Instance:
    rng = random.Random(seed)
    n = n_services if n_services is not None else rng.randint(params.min_services, params.max_services)
    n_entities = rng.randint(50, 400)
    stores = []
    for j in range(n):
        size = int(math.exp(rng.uniform(math.log(params.min_triples), math.log(params.max_triples))))
        stores.append(_StoreData(rng, j, n_entities, size, params))
    builder = _QueryBuilder(rng, params)
    bodies = [builder.service(store, j, connect=j > 0) for j, store in enumerate(stores)]

    endpoints = [Term.iri(store.iri) for store in stores]
    data = {store.iri: _prefixed_store_terms(store.triples) for store in stores}
    if n > 1 and rng.random() < params.p_var_endpoint:
        target = rng.randrange(1, n)
        source = rng.randrange(0, target)
        src_var = builder.fresh("src")
        anchor = next((t.subject for t in bodies[source][0] if t.subject.is_variable), None)
        if anchor is not None:
            bodies[source][0].append(TriplePattern(anchor, Term(TermKind.PREFIXED_NAME, "ex:source"), Term.var(src_var)))
            endpoints[target] = Term.var(src_var)
            subjects = sorted({t[0] for t in data[stores[source].iri]})
            links = []
            for subj in rng.sample(subjects, min(len(subjects), max(3, len(subjects) // 5))):
                dest = stores[target].iri if rng.random() < 0.8 else f"{EX}missing{rng.randrange(3)}"
                links.append((subj, LINK, f"<{dest}>"))
            data[stores[source].iri] = data[stores[source].iri] + links

    services = [
        ServicePattern(endpoints[j], tuple(triples), tuple(filters), original_index=j)
        for j, (triples, filters) in enumerate(bodies)
    ]
    segments: list[QuerySegment] = []
    current: list[ServicePattern] = []
    for s in services:
        if current and s.endpoint_variable is None and rng.random() < params.p_optional:
            segments.append(QuerySegment(tuple(current)))
            segments.append(QuerySegment((s,), inside_optional=True))
            current = []
        else:
            current.append(s)
    if current:
        segments.append(QuerySegment(tuple(current)))
    query = FederatedQuery(PREFIX, "*", tuple(segments))
    return Instance(seed, query, Federation.from_triples(data))
