"""Abstract syntax for federated SELECT queries built from SERVICE blocks.

Everything here is immutable. Variable names are stored without their
``?``/``$`` sigil so that ``?x`` and ``$x`` compare equal.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator
from dataclasses import dataclass, replace
from enum import Enum
from typing import AbstractSet

BindingSet = frozenset  # frozenset[str] of sigil-free variable names


class TermKind(Enum):
    IRI = "iri"
    PREFIXED_NAME = "pname"
    VARIABLE = "var"
    LITERAL = "literal"
    BLANK_NODE = "bnode"
    KEYWORD_A = "a"


class Position(Enum):
    SUBJECT = "subject"
    PREDICATE = "predicate"
    OBJECT = "object"


@dataclass(frozen=True)
class Term:
    kind: TermKind
    lexical: str
    has_language_tag: bool = False
    has_datatype: bool = False

    def __post_init__(self) -> None:
        if self.kind is TermKind.VARIABLE and self.lexical[:1] not in ("?", "$"):
            raise ValueError(f"variable must start with ? or $: {self.lexical!r}")
        if self.kind is TermKind.IRI and not (
            self.lexical.startswith("<") and self.lexical.endswith(">")
        ):
            raise ValueError(f"IRI must be enclosed in <>: {self.lexical!r}")
        if self.kind is TermKind.KEYWORD_A and self.lexical != "a":
            raise ValueError("keyword 'a' must serialize as 'a'")

    @classmethod
    def var(cls, name: str) -> Term:
        return cls(TermKind.VARIABLE, name if name[:1] in "?$" else "?" + name)

    @classmethod
    def iri(cls, value: str) -> Term:
        return cls(TermKind.IRI, value if value.startswith("<") else f"<{value}>")

    @property
    def is_variable(self) -> bool:
        return self.kind is TermKind.VARIABLE

    @property
    def name(self) -> str:
        """Sigil-free name of a variable, or the label of a blank node."""
        if self.kind is TermKind.VARIABLE:
            return self.lexical[1:]
        if self.kind is TermKind.BLANK_NODE:
            return self.lexical
        raise ValueError(f"{self.lexical!r} is not a variable")

    def __str__(self) -> str:
        return self.lexical


@dataclass(frozen=True)
class TriplePattern:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self) -> None:
        if self.subject.kind in (TermKind.LITERAL, TermKind.KEYWORD_A):
            raise ValueError(f"invalid subject {self.subject.lexical!r}")
        if self.predicate.kind in (TermKind.LITERAL, TermKind.BLANK_NODE):
            raise ValueError(f"invalid predicate {self.predicate.lexical!r}")
        if self.object.kind is TermKind.KEYWORD_A:
            raise ValueError("'a' is only allowed in predicate position")

    def positions(self) -> Iterator[tuple[Position, Term]]:
        yield Position.SUBJECT, self.subject
        yield Position.PREDICATE, self.predicate
        yield Position.OBJECT, self.object

    def variables(self) -> set[str]:
        return {t.name for t in (self.subject, self.predicate, self.object) if t.is_variable}

    def __str__(self) -> str:
        return f"{self.subject} {self.predicate} {self.object}"


@dataclass(frozen=True)
class SubSelect:
    """A ``SELECT`` nested directly inside a SERVICE body.

    ``head`` is the verbatim text between SELECT and WHERE; ``modifiers`` the
    verbatim solution modifiers after the inner group.
    """

    head: str
    projection: frozenset[str]
    modifiers: str = ""


@dataclass(frozen=True)
class ServicePattern:
    endpoint: Term
    triples: tuple[TriplePattern, ...]
    filters: tuple[str, ...] = ()
    silent: bool = False
    sub_select: SubSelect | None = None
    original_index: int = 0

    def __post_init__(self) -> None:
        if self.endpoint.kind not in (TermKind.IRI, TermKind.PREFIXED_NAME, TermKind.VARIABLE):
            raise ValueError(f"invalid SERVICE endpoint {self.endpoint.lexical!r}")
        if not self.triples and self.sub_select is None:
            raise ValueError("SERVICE pattern needs triples or a sub-select")
        if self.original_index < 0:
            raise ValueError("original_index must be >= 0")

    @property
    def sub_projection(self) -> frozenset[str] | None:
        return None if self.sub_select is None else self.sub_select.projection

    @property
    def endpoint_variable(self) -> str | None:
        return self.endpoint.name if self.endpoint.is_variable else None

    @property
    def literal_count(self) -> int:
        return sum(
            1 for t in self.triples for _, term in t.positions() if term.kind is TermKind.LITERAL
        )

    def triple_variables(self) -> set[str]:
        out: set[str] = set()
        for t in self.triples:
            out |= t.variables()
        return out


@dataclass(frozen=True)
class QuerySegment:
    services: tuple[ServicePattern, ...]
    inside_optional: bool = False

    def original_indices(self) -> tuple[int, ...]:
        return tuple(s.original_index for s in self.services)


@dataclass(frozen=True)
class FederatedQuery:
    prologue: str
    projection: str
    segments: tuple[QuerySegment, ...]
    tail: str = ""

    def __post_init__(self) -> None:
        if not self.segments or not any(seg.services for seg in self.segments):
            raise ValueError("query must contain at least one SERVICE pattern")

    @property
    def services(self) -> tuple[ServicePattern, ...]:
        return tuple(s for seg in self.segments for s in seg.services)

    def with_orders(self, orders: Iterable[Iterable[int]]) -> FederatedQuery:
        """Rearrange each segment's services to the given original indices."""
        segments = []
        for seg, order in zip(self.segments, orders, strict=True):
            by_index = {s.original_index: s for s in seg.services}
            order = list(order)
            if sorted(order) != sorted(by_index):
                raise ValueError(f"{order} is not a permutation of {sorted(by_index)}")
            segments.append(replace(seg, services=tuple(by_index[i] for i in order)))
        return replace(self, segments=tuple(segments))

    def renumbered(self) -> FederatedQuery:
        """Reset original indices to the current textual order."""
        counter = iter(range(len(self.services)))
        segments = tuple(
            replace(seg, services=tuple(replace(s, original_index=next(counter)) for s in seg.services))
            for seg in self.segments
        )
        return replace(self, segments=segments)


def exposed_variables(s: ServicePattern) -> frozenset[str]:
    """Variables a SERVICE pattern binds for the patterns evaluated after it."""
    if s.sub_projection is not None:
        return s.sub_projection
    names = s.triple_variables()
    if s.endpoint_variable is not None:
        names.add(s.endpoint_variable)
    return frozenset(names)


def variable_positions(
    s: ServicePattern, bound: AbstractSet[str] = frozenset()
) -> dict[str, frozenset[Position]]:
    """Map each unbound exposed variable to the triple positions it occupies.

    A variable that only names the endpoint (``SERVICE ?x``) is left out: the
    call itself instantiates it. Sub-select projection variables without any
    triple occurrence (aggregate aliases) map to an empty set.
    """
    occupied: dict[str, set[Position]] = {}
    for t in s.triples:
        for pos, term in t.positions():
            if term.is_variable:
                occupied.setdefault(term.name, set()).add(pos)
    out = {}
    for name in exposed_variables(s):
        if name in bound:
            continue
        if name == s.endpoint_variable and name not in occupied:
            continue
        out[name] = frozenset(occupied.get(name, ()))
    return out


def bound_after(services: Iterable[ServicePattern], bound: AbstractSet[str] = frozenset()) -> frozenset[str]:
    out = set(bound)
    for s in services:
        out |= exposed_variables(s)
    return frozenset(out)

