"""Syntactic unrestrictiveness estimates for a single SERVICE pattern.

Four estimators of increasing detail, selected by :class:`Method`:

* ``VC``    number of variables, bindings ignored
* ``UVC``   number of variables not yet bound
* ``WUVC``  unbound variables weighted by the position they occupy
* ``JWUVC`` the WUVC score damped by the star/chain/unusual joins in the pattern

Higher scores mean more expected bindings, so the pattern should run later.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from enum import Enum
from itertools import combinations
from os import PathLike
from typing import AbstractSet, Any

from .model import Position, ServicePattern, TermKind, variable_positions


class Method(Enum):
    VC = "VC"
    UVC = "UVC"
    WUVC = "WUVC"
    JWUVC = "JWUVC"

    @classmethod
    def parse(cls, value: str | Method) -> Method:
        if isinstance(value, Method):
            return value
        try:
            return cls[value.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown cost method {value!r}") from None


@dataclass(frozen=True)
class CostConfig:
    method: Method = Method.JWUVC
    w_s: float = 1.0
    w_p: float = 0.1
    w_o: float = 0.8
    j_star: float = 0.5
    j_chain: float = 0.6
    j_unusual: float = 1.0
    exhaustive_cap: int = 9

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", Method.parse(self.method))
        for name in ("w_s", "w_p", "w_o", "j_star", "j_chain", "j_unusual"):
            value = getattr(self, name)
            if not value >= 0:
                raise ValueError(f"{name} must be >= 0, got {value!r}")
        if self.exhaustive_cap < 1:
            raise ValueError("exhaustive_cap must be >= 1")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> CostConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["method"] = self.method.value
        return out


def load_config(path: str | PathLike[str], **overrides: Any) -> CostConfig:
    """Read a JSON cost configuration; absent keys keep their defaults."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return CostConfig.from_dict(data)


@dataclass(frozen=True)
class JoinCounts:
    star: int = 0
    chain: int = 0
    unusual: int = 0

    @property
    def total(self) -> int:
        return self.star + self.chain + self.unusual


def count_joins(s: ServicePattern) -> JoinCounts:
    """Classify every pair of occurrences of a shared variable in distinct triples.

    subject/subject and object/object pairs are star joins, subject/object
    pairs chain joins, and any pair touching a predicate an unusual join.
    Blank nodes join like variables.
    """
    occurrences: dict[str, list[tuple[int, Position]]] = {}
    for i, t in enumerate(s.triples):
        for pos, term in t.positions():
            if term.kind in (TermKind.VARIABLE, TermKind.BLANK_NODE):
                occurrences.setdefault(term.name, []).append((i, pos))
    star = chain = unusual = 0
    for occ in occurrences.values():
        for (ti, pa), (tj, pb) in combinations(occ, 2):
            if ti == tj:
                continue
            if Position.PREDICATE in (pa, pb):
                unusual += 1
            elif pa is pb:
                star += 1
            else:
                chain += 1
    return JoinCounts(star, chain, unusual)


def position_weight(positions: AbstractSet[Position], cfg: CostConfig) -> float:
    # a variable in several positions counts in the most restrictive one:
    # predicate, then object, then subject
    if Position.PREDICATE in positions:
        return cfg.w_p
    if Position.OBJECT in positions:
        return cfg.w_o
    return cfg.w_s


def weighted_unbound(s: ServicePattern, bound: AbstractSet[str], cfg: CostConfig) -> float:
    return sum(position_weight(p, cfg) for p in variable_positions(s, bound).values())


def unrestrictiveness(
    s: ServicePattern, bound: AbstractSet[str] = frozenset(), cfg: CostConfig = CostConfig()
) -> float:
    method = cfg.method
    if method is Method.VC:
        return float(len(variable_positions(s)))
    if method is Method.UVC:
        return float(len(variable_positions(s, bound)))
    numerator = weighted_unbound(s, bound, cfg)
    if method is Method.WUVC:
        return numerator
    joins = count_joins(s)
    return numerator / (
        1 + joins.star * cfg.j_star + joins.chain * cfg.j_chain + joins.unusual * cfg.j_unusual
    )


def tie_break_score(s: ServicePattern) -> int:
    """Literals in the triples plus FILTER expressions; higher is more selective."""
    return s.literal_count + len(s.filters)
