"""Cost-based reordering of SERVICE patterns in federated SPARQL queries."""

from __future__ import annotations

from .cost import CostConfig, Method, unrestrictiveness
from .model import FederatedQuery, ServicePattern, Term, TriplePattern
from .parser import ParseError, UnsupportedConstruct, parse_query, serialize_query
from .planner import PlanReport, exhaustive_plan, greedy_plan, plan, sequence_cost

__all__ = [
    "CostConfig",
    "FederatedQuery",
    "Method",
    "ParseError",
    "PlanReport",
    "ServicePattern",
    "Term",
    "TriplePattern",
    "UnsupportedConstruct",
    "exhaustive_plan",
    "greedy_plan",
    "parse_query",
    "plan",
    "sequence_cost",
    "serialize_query",
    "unrestrictiveness",
]
