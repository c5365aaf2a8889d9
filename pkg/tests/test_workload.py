from __future__ import annotations

import random

from fedreorder.model import exposed_variables
from fedreorder.parser import parse_query, serialize_query
from fedreorder.planner import valid_orderings
from fedreorder.workload import WorkloadParams, generate_instance, random_query, random_service


def test_random_queries_are_seeded_and_parseable():
    for seed in range(50):
        a = random_query(random.Random(seed), 5, p_var_endpoint=0.3, p_optional=0.3)
        b = random_query(random.Random(seed), 5, p_var_endpoint=0.3, p_optional=0.3)
        assert a == b
        assert parse_query(serialize_query(a)) == a


def test_random_query_endpoint_variables_have_binders():
    for seed in range(100):
        query = random_query(random.Random(seed), 6, p_var_endpoint=0.5)
        seen: set[str] = set()
        for s in query.services:
            if s.endpoint_variable is not None:
                assert s.endpoint_variable in seen
            seen |= exposed_variables(s)


def test_random_service_shape():
    rng = random.Random(0)
    for i in range(200):
        s = random_service(rng, i, max_triples=6)
        assert 1 <= len(s.triples) <= 6 and s.original_index == i


def test_instances_are_deterministic_and_connected():
    params = WorkloadParams(min_triples=50, max_triples=400, p_var_endpoint=0.5)
    for seed in range(30):
        a, b = generate_instance(seed, params), generate_instance(seed, params)
        assert a.query_text == b.query_text
        assert {k: v.triples for k, v in a.federation.stores.items()} == {
            k: v.triples for k, v in b.federation.stores.items()
        }
        services = a.query.services
        assert 2 <= len(services) <= 5
        for s in services[1:]:
            # every later service shares a variable with an earlier one
            earlier = set().union(*(exposed_variables(t) for t in services[: s.original_index]))
            assert exposed_variables(s) & earlier
        assert list(valid_orderings(a.query.segments[0]))
        assert parse_query(a.query_text) == a.query
        for s in services:
            assert len(set(s.triples)) == len(s.triples)


def test_store_sizes_follow_params():
    params = WorkloadParams(min_triples=100, max_triples=200)
    inst = generate_instance(3, params)
    for store in inst.federation.stores.values():
        assert 100 <= len(store) <= 260  # labels and source links come on top


def test_fixed_service_count():
    assert len(generate_instance(1, n_services=4).query.services) == 4
