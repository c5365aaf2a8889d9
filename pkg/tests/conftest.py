from __future__ import annotations

from pathlib import Path

import pytest

from fedreorder.parser import parse_query

FIXTURES = Path(__file__).parent / "fixtures"
DATA = Path(__file__).parent / "data"

_ACCEPTANCE_LINES: list[str] = []


def listing_text(n: int) -> str:
    return (FIXTURES / "listings" / f"listing{n}.rq").read_text(encoding="utf-8")


@pytest.fixture
def listing():
    return lambda n: parse_query(listing_text(n))


@pytest.fixture
def criterion():
    """Record one acceptance line; returns ``ok`` so tests can assert on it."""

    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter) -> None:
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
