from __future__ import annotations

import json
import random

import pytest

import oracles
from fedreorder.cost import (
    CostConfig,
    JoinCounts,
    Method,
    count_joins,
    load_config,
    position_weight,
    tie_break_score,
    unrestrictiveness,
)
from fedreorder.model import Position
from fedreorder.parser import parse_query
from fedreorder.workload import random_service

DEFAULT = CostConfig()


def service(body: str, endpoint: str = "<http://e>"):
    return parse_query(f"SELECT * WHERE {{ SERVICE {endpoint} {{ {body} }} }}").services[0]


@pytest.mark.parametrize(
    "positions, expected",
    [
        ({Position.SUBJECT}, 1.0),
        ({Position.OBJECT}, 0.8),
        ({Position.PREDICATE}, 0.1),
        ({Position.SUBJECT, Position.OBJECT}, 0.8),
        ({Position.SUBJECT, Position.PREDICATE}, 0.1),
        ({Position.OBJECT, Position.PREDICATE}, 0.1),
        (set(), 1.0),
    ],
)
def test_position_weight_priority(positions, expected):
    assert position_weight(frozenset(positions), DEFAULT) == expected


def test_listing5_join_classification(listing):
    q = listing(5)
    assert [count_joins(s) for s in q.services] == [
        JoinCounts(star=1),
        JoinCounts(chain=1),
        JoinCounts(unusual=1),
    ]


def test_join_kinds():
    assert count_joins(service("?a :p ?b . ?a :q ?c")) == JoinCounts(star=1)
    assert count_joins(service("?a :p ?b . ?c :q ?b")) == JoinCounts(star=1)
    assert count_joins(service("?a :p ?b . ?b :q ?c")) == JoinCounts(chain=1)
    assert count_joins(service("?a ?p ?b . ?p :q ?c")) == JoinCounts(unusual=1)
    assert count_joins(service("?a :p ?a")) == JoinCounts()  # same triple
    assert count_joins(service("?a :p _:x . _:x :q ?c")) == JoinCounts(chain=1)
    assert count_joins(service("?a :p ?b . ?a :q ?b . ?a :r ?c")) == JoinCounts(star=4)


@pytest.mark.parametrize("method, expected", [("VC", 3), ("UVC", 2), ("WUVC", 1.8), ("JWUVC", 1.8 / 1.6)])
def test_methods_on_a_chain(method, expected):
    s = service("?a :p ?b . ?b :q ?c")
    assert unrestrictiveness(s, {"b"}, CostConfig(method=method)) == pytest.approx(expected)


def test_endpoint_only_variable_does_not_count():
    s = service("?a :p ?b", endpoint="?src")
    assert unrestrictiveness(s, frozenset(), CostConfig(method=Method.VC)) == 2


def test_blank_nodes_are_not_unbound_variables():
    s = service("?a :p _:x")
    assert unrestrictiveness(s, frozenset(), CostConfig(method=Method.UVC)) == 1


def test_tie_break_counts_literals_and_filters():
    s = service('?a :p "x" . ?a :q 5 FILTER(?a != 1)')
    assert tie_break_score(s) == 3


def test_method_parse():
    assert Method.parse("jwuvc") is Method.JWUVC
    assert Method.parse(Method.VC) is Method.VC
    with pytest.raises(ValueError):
        Method.parse("fast")


def test_config_validation_and_dict_round_trip():
    with pytest.raises(ValueError):
        CostConfig(w_s=-1)
    with pytest.raises(ValueError):
        CostConfig(exhaustive_cap=0)
    with pytest.raises(ValueError):
        CostConfig.from_dict({"w_x": 1})
    cfg = CostConfig(method="uvc", j_star=0.25)
    assert CostConfig.from_dict(cfg.to_dict()) == cfg


def test_load_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"method": "WUVC", "w_o": 0.5}))
    cfg = load_config(path)
    assert cfg.method is Method.WUVC and cfg.w_o == 0.5 and cfg.w_s == 1.0
    assert load_config(path, method=Method.VC).method is Method.VC
    path.write_text("[1]")
    with pytest.raises(ValueError):
        load_config(path)


def test_agrees_with_oracle_on_random_patterns():
    rng = random.Random(11)
    for _ in range(500):
        s = random_service(rng, max_triples=6)
        bound = frozenset(v for v in s.triple_variables() if rng.random() < 0.5)
        for m in Method:
            assert unrestrictiveness(s, bound, CostConfig(method=m)) == pytest.approx(
                oracles.cost(s, bound, m.value), abs=1e-12
            )
