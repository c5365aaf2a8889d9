from __future__ import annotations

import json
import random
from collections import Counter

import pytest

from conftest import FIXTURES
from fedreorder.cost import CostConfig, Method
from fedreorder.ntriples import XSD, make_literal
from fedreorder.parser import parse_query
from fedreorder.planner import plan
from fedreorder.simulator import (
    Federation,
    FederationError,
    SimulationError,
    SimulationLimitExceeded,
    TripleStore,
    UnknownEndpoint,
    UnsupportedFilter,
    all_valid_orders,
    compile_filter,
    evaluate_sequence,
    load_federation,
    simulate_orderings,
    simulated_optimal,
)
from fedreorder.workload import WorkloadParams, generate_instance

EX = "http://ex.org/"
PFX = f"PREFIX ex: <{EX}>\n"


def iri(local: str) -> str:
    return f"<{EX}{local}>"


def fed(**stores) -> Federation:
    return Federation.from_triples({f"{EX}{k}": v for k, v in stores.items()})


def q(body: str):
    return parse_query(PFX + "SELECT * WHERE {\n" + body + "\n}")


def test_store_lookup_by_any_mask():
    t = [(iri("a"), iri("p"), iri("b")), (iri("a"), iri("q"), iri("c")), (iri("d"), iri("p"), iri("b"))]
    store = TripleStore("x", t)
    assert len(store.lookup(None, None, None)) == 3
    assert set(store.lookup(iri("a"), None, None)) == set(t[:2])
    assert store.lookup(None, iri("p"), iri("b")) == sorted([t[0], t[2]])
    assert store.lookup(iri("z"), None, None) == ()


def test_listing2_federation_calls():
    query = parse_query((FIXTURES / "federation" / "listing2.rq").read_text())
    federation = load_federation(FIXTURES / "federation" / "manifest.json")
    as_written = evaluate_sequence(query, federation)
    assert as_written.total_calls == 1001
    assert as_written.per_service_calls == [(0, 1), (1, 1000)]
    planned, _ = plan(query, CostConfig(method=Method.VC))
    better = evaluate_sequence(planned, federation)
    assert better.total_calls == 3
    assert better.solution_multiset() == as_written.solution_multiset()
    assert simulated_optimal(query, federation).order == ((1, 0),)


def test_bind_join_call_counting():
    data = fed(
        e1=[(iri(f"s{i}"), iri("p"), iri(f"o{i % 3}")) for i in range(6)],
        e2=[(iri(f"o{i}"), iri("q"), make_literal(str(i), datatype=f"<{XSD}integer>")) for i in range(3)],
    )
    query = q("SERVICE ex:e1 { ?s ex:p ?o }\nSERVICE ex:e2 { ?o ex:q ?n FILTER(?n >= 1) }")
    r = evaluate_sequence(query, data)
    # the second service runs once per distinct ?o, not per solution
    assert r.per_service_calls == [(0, 1), (1, 3)]
    assert r.solution_count == 4
    assert r.intermediate_sizes == [6, 4]


def test_variable_endpoint_calls_each_distinct_source():
    data = fed(
        hub=[(iri("a"), iri("at"), iri("e1")), (iri("b"), iri("at"), iri("e1")), (iri("c"), iri("at"), iri("gone"))],
        e1=[(iri("a"), iri("v"), iri("x")), (iri("b"), iri("v"), iri("y"))],
    )
    query = q("SERVICE ex:hub { ?s ex:at ?src }\nSERVICE ?src { ?s ex:v ?val }")
    r = evaluate_sequence(query, data)
    assert r.per_service_calls == [(0, 1), (1, 2)]  # e1 and the missing store
    assert sorted(mu["val"] for mu in r.solutions) == [iri("x"), iri("y")]


def test_optional_is_a_left_join():
    data = fed(
        a=[(iri("x1"), iri("p"), iri("y")), (iri("x2"), iri("p"), iri("y"))],
        b=[(iri("x1"), iri("label"), make_literal("one"))],
    )
    query = q("SERVICE ex:a { ?x ex:p ?y }\nOPTIONAL { SERVICE ex:b { ?x ex:label ?l } }")
    r = evaluate_sequence(query, data)
    assert r.solution_multiset() == Counter(
        {
            frozenset({("x", iri("x1")), ("y", iri("y")), ("l", '"one"')}): 1,
            frozenset({("x", iri("x2")), ("y", iri("y"))}): 1,
        }
    )


def test_empty_stores_give_no_solutions():
    query = q("SERVICE ex:a { ?s ?p ?o }\nSERVICE ex:b { ?s ex:q ?z }")
    for order, r in simulate_orderings(query, fed(a=[], b=[])).items():
        assert r.solution_count == 0


def test_unknown_endpoint_and_undeclared_prefix():
    with pytest.raises(UnknownEndpoint):
        evaluate_sequence(q("SERVICE ex:nowhere { ?s ?p ?o }"), fed(a=[]))
    with pytest.raises(SimulationError, match="prefix"):
        evaluate_sequence(parse_query("SELECT * WHERE { SERVICE <http://ex.org/a> { ?s :p ?o } }"), fed(a=[]))


def test_sub_select_is_not_simulated():
    query = q("SERVICE ex:a { SELECT ?s WHERE { ?s ?p ?o } }")
    with pytest.raises(SimulationError):
        evaluate_sequence(query, fed(a=[]))


@pytest.mark.parametrize(
    "expr, binding, expected",
    [
        ("(?n > 3)", make_literal("5", datatype=f"<{XSD}integer>"), True),
        ("(3 > ?n)", make_literal("5", datatype=f"<{XSD}integer>"), False),
        ("(?n = 5.0)", make_literal("5", datatype=f"<{XSD}integer>"), True),
        ("(?n != ex:a)", iri("a"), False),
        ('(?n = "b")', '"b"', True),
        ('(?n < "c")', '"b"', True),
        ('(?n < "c")', '"b"@en', False),
        ('regex(?n, "ell")', '"hello"', True),
        ('(regex(?n, "xyz"))', '"hello"', False),
    ],
)
def test_filters(expr, binding, expected):
    f = compile_filter(expr, {"ex": EX})
    assert f({"n": binding}) is expected
    assert f({}) is False


@pytest.mark.parametrize("expr", ["(?a < ?b)", "(bound(?a))", "(?a + 1 > 2)"])
def test_unsupported_filters(expr):
    with pytest.raises(UnsupportedFilter):
        compile_filter(expr, {})


def test_limit_guard():
    data = fed(a=[(iri(f"s{i}"), iri("p"), iri("o")) for i in range(50)], b=[(iri(f"t{i}"), iri("p"), iri("o")) for i in range(50)])
    query = q("SERVICE ex:a { ?s ex:p ?o }\nSERVICE ex:b { ?t ex:p ?u }")
    with pytest.raises(SimulationLimitExceeded):
        evaluate_sequence(query, data, max_solutions=100)
    # counting only ?s x ?t pairs that later services still read collapses to one row
    r = evaluate_sequence(query, data, keep_solutions=False, max_solutions=100)
    assert r.solution_count == 2500


def test_counting_mode_matches_full_evaluation():
    params = WorkloadParams(min_triples=20, max_triples=300, p_optional=0.3, p_var_endpoint=0.4)
    compared = 0
    for seed in range(40):
        inst = generate_instance(seed, params)
        for order in all_valid_orders(inst.query)[:4]:
            query = inst.query.with_orders(order)
            full = evaluate_sequence(query, inst.federation)
            counted = evaluate_sequence(query, inst.federation, keep_solutions=False)
            assert counted.solutions is None
            assert (counted.per_service_calls, counted.intermediate_sizes, counted.solution_count) == (
                full.per_service_calls,
                full.intermediate_sizes,
                full.solution_count,
            )
            compared += 1
    assert compared > 100


def test_shared_cache_does_not_change_results():
    inst = generate_instance(5, WorkloadParams(min_triples=50, max_triples=500))
    fresh = {o: evaluate_sequence(inst.query.with_orders(o), inst.federation).total_calls for o in all_valid_orders(inst.query)}
    shared = {o: r.total_calls for o, r in simulate_orderings(inst.query, inst.federation).items()}
    assert fresh == shared


def test_load_federation_errors(tmp_path):
    (tmp_path / "a.nt").write_text("<http://a> <http://p> <http://b> .\n")
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({"http://a": "a.nt"}))
    assert len(load_federation(manifest).get("<http://a>")) == 1
    manifest.write_text('{"http://a": "a.nt", "http://a": "a.nt"}')
    with pytest.raises(FederationError, match="duplicate"):
        load_federation(manifest)
    manifest.write_text(json.dumps({"http://a": "missing.nt"}))
    with pytest.raises(FederationError):
        load_federation(manifest)
    manifest.write_text(json.dumps({"http://a": 3}))
    with pytest.raises(FederationError, match="string"):
        load_federation(manifest)
    manifest.write_text("[]")
    with pytest.raises(FederationError):
        load_federation(manifest)
    manifest.write_text("{")
    with pytest.raises(FederationError):
        load_federation(manifest)


def test_segment_above_cap_is_rejected():
    query = q("\n".join(f"SERVICE ex:a {{ ?s ex:p{i} ?o }}" for i in range(4)))
    with pytest.raises(SimulationError):
        simulate_orderings(query, fed(a=[]), cap=3)
