from __future__ import annotations

import pytest

from fedreorder.model import (
    FederatedQuery,
    Position,
    QuerySegment,
    ServicePattern,
    SubSelect,
    Term,
    TermKind,
    TriplePattern,
    bound_after,
    exposed_variables,
    variable_positions,
)

V = Term.var
P = Term(TermKind.PREFIXED_NAME, ":p")


def svc(*triples, endpoint="<http://e>", index=0, sub=None):
    ep = Term.var(endpoint[1:]) if endpoint.startswith("?") else Term.iri(endpoint)
    return ServicePattern(ep, tuple(TriplePattern(*t) for t in triples), sub_select=sub, original_index=index)


def test_term_constructors_and_validation():
    assert Term.var("x").lexical == "?x"
    assert Term.var("$y").name == "$y"[1:]
    assert Term.iri("http://a").lexical == "<http://a>"
    assert Term(TermKind.BLANK_NODE, "_:b1").name == "_:b1"
    with pytest.raises(ValueError):
        Term(TermKind.VARIABLE, "x")
    with pytest.raises(ValueError):
        Term(TermKind.IRI, "http://a")
    with pytest.raises(ValueError):
        Term.iri("http://a").name


def test_triple_rejects_misplaced_terms():
    lit = Term(TermKind.LITERAL, '"x"')
    with pytest.raises(ValueError):
        TriplePattern(lit, P, V("o"))
    with pytest.raises(ValueError):
        TriplePattern(V("s"), lit, V("o"))
    with pytest.raises(ValueError):
        TriplePattern(V("s"), P, Term(TermKind.KEYWORD_A, "a"))


def test_service_requires_body_and_valid_endpoint():
    with pytest.raises(ValueError):
        ServicePattern(Term.iri("http://e"), ())
    with pytest.raises(ValueError):
        ServicePattern(Term(TermKind.LITERAL, '"e"'), (TriplePattern(V("s"), P, V("o")),))


def test_positions_collects_every_role():
    s = svc((V("x"), V("p"), V("y")), (V("y"), P, V("x")))
    assert variable_positions(s) == {
        "x": frozenset({Position.SUBJECT, Position.OBJECT}),
        "y": frozenset({Position.SUBJECT, Position.OBJECT}),
        "p": frozenset({Position.PREDICATE}),
    }
    assert variable_positions(s, {"x", "p"}) == {"y": frozenset({Position.SUBJECT, Position.OBJECT})}


def test_endpoint_only_variable_is_exposed_but_not_costed():
    s = svc((V("a"), P, V("b")), endpoint="?src")
    assert exposed_variables(s) == {"a", "b", "src"}
    assert set(variable_positions(s)) == {"a", "b"}
    t = svc((V("src"), P, V("b")), endpoint="?src")
    assert set(variable_positions(t)) == {"src", "b"}


def test_sub_select_exposes_only_projection():
    sub = SubSelect("?g (COUNT(?m) AS ?n)", frozenset({"g", "n"}))
    s = svc((V("g"), P, V("m")), sub=sub)
    assert exposed_variables(s) == {"g", "n"}
    assert variable_positions(s) == {"g": frozenset({Position.SUBJECT}), "n": frozenset()}


def test_bound_after_accumulates():
    a = svc((V("x"), P, V("y")))
    b = svc((V("y"), P, V("z")), index=1)
    assert bound_after([a, b], {"w"}) == {"w", "x", "y", "z"}


def test_with_orders_and_renumbered():
    a, b, c = (svc((V(f"v{i}"), P, V("o")), index=i) for i in range(3))
    q = FederatedQuery("", "*", (QuerySegment((a, b)), QuerySegment((c,), inside_optional=True)))
    r = q.with_orders([(1, 0), (2,)])
    assert [s.original_index for s in r.services] == [1, 0, 2]
    assert [s.original_index for s in r.renumbered().services] == [0, 1, 2]
    with pytest.raises(ValueError):
        q.with_orders([(0, 0), (2,)])
    with pytest.raises(ValueError):
        q.with_orders([(0, 1)])


def test_query_needs_a_service():
    with pytest.raises(ValueError):
        FederatedQuery("", "*", ())


def test_literal_count():
    lit = Term(TermKind.LITERAL, "5")
    s = svc((V("x"), P, lit), (V("x"), P, Term(TermKind.LITERAL, '"a"')))
    assert s.literal_count == 2
