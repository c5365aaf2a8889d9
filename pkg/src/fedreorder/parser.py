"""Parser and serializer for the supported federated-query subset.

Grammar (informal)::

    query    := prologue SELECT projection [WHERE] '{' (service | optional | '.')* '}' tail
    optional := OPTIONAL '{' (service | '.')+ '}'
    service  := SERVICE [SILENT] (IRIREF | PNAME | VAR) '{' (triples | FILTER | subselect) '}'

Projection, prologue, tail and FILTER expressions are kept as verbatim text.
Constructs the planner cannot reorder safely (UNION, nested groups, triple
patterns next to SERVICE blocks, nested SERVICE) raise ``UnsupportedConstruct``
instead of being dropped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .model import (
    FederatedQuery,
    QuerySegment,
    ServicePattern,
    SubSelect,
    Term,
    TermKind,
    TriplePattern,
)


class ErrorKind(Enum):
    SYNTAX = "Syntax"
    UNSUPPORTED = "UnsupportedConstruct"


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int, kind: ErrorKind = ErrorKind.SYNTAX):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column
        self.kind = kind


class UnsupportedConstruct(ParseError):
    """Valid SPARQL outside the reorderable subset."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(message, line, column, ErrorKind.UNSUPPORTED)


_TOKEN_PATTERNS = [
    ("WS", r"(?:\s+|#[^\n]*)+"),
    ("IRIREF", r"<[^<>\"{}|^`\\\x00-\x20]*>"),
    ("STRING", r'"""(?:[^"\\]|\\.|"(?!""))*"""'
               r"|'''(?:[^'\\]|\\.|'(?!''))*'''"
               r'|"(?:[^"\\\n]|\\.)*"'
               r"|'(?:[^'\\\n]|\\.)*'"),
    ("VAR", r"[?$][A-Za-z0-9_\u00B7-\uFFFF]+"),
    ("BNODE", r"_:[A-Za-z0-9_\u00B7-\uFFFF][A-Za-z0-9_\-.\u00B7-\uFFFF]*"),
    ("PNAME", r"(?:[A-Za-z\u00C0-\uFFFF][A-Za-z0-9_\-.\u00B7-\uFFFF]*)?:"
              r"(?:[A-Za-z0-9_:%\u00C0-\uFFFF](?:[A-Za-z0-9_\-.:%\u00B7-\uFFFF]*))?"),
    ("NUMBER", r"[+-]?(?:\d+\.\d*[eE][+-]?\d+|\.\d+[eE][+-]?\d+|\d+[eE][+-]?\d+|\d*\.\d+|\d+)"),
    ("NAME", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("LANGTAG", r"@[A-Za-z]+(?:-[A-Za-z0-9]+)*"),
    ("DTYPE", r"\^\^"),
    ("PUNCT", r"[{}().;,*\[\]]"),
    ("OTHER", r"\S"),
]
_TOKEN_RE = re.compile("|".join(f"(?P<{name}>{pat})" for name, pat in _TOKEN_PATTERNS))

_UNSUPPORTED_KEYWORDS = {"UNION", "GRAPH", "BIND", "VALUES", "MINUS", "OPTIONAL", "SERVICE", "SELECT"}
_TAIL_KEYWORDS = {"GROUP", "ORDER", "LIMIT", "OFFSET", "HAVING"}


@dataclass
class _Token:
    kind: str
    text: str
    start: int
    end: int

    def keyword(self) -> str | None:
        return self.text.upper() if self.kind == "NAME" else None


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def location(self, pos: int) -> tuple[int, int]:
        line = self.text.count("\n", 0, pos) + 1
        return line, pos - (self.text.rfind("\n", 0, pos) + 1) + 1

    def error(self, message: str, pos: int | None = None, kind: ErrorKind = ErrorKind.SYNTAX) -> ParseError:
        line, col = self.location(self.pos if pos is None else pos)
        if kind is ErrorKind.UNSUPPORTED:
            return UnsupportedConstruct(message, line, col)
        return ParseError(message, line, col, kind)

    def _scan(self, pos: int) -> _Token:
        while True:
            if pos >= len(self.text):
                return _Token("EOF", "", pos, pos)
            m = _TOKEN_RE.match(self.text, pos)
            assert m is not None
            kind = m.lastgroup or "OTHER"
            if kind == "WS":
                pos = m.end()
                continue
            text = m.group()
            if kind in ("PNAME", "BNODE"):
                # a local name may not end with '.'; that dot terminates the triple
                text = text.rstrip(".")
            return _Token(kind, text, pos, pos + len(text))

    def peek(self) -> _Token:
        return self._scan(self.pos)

    def next(self) -> _Token:
        tok = self._scan(self.pos)
        self.pos = tok.end
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.next()
        if tok.text != text:
            raise self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.start)
        return tok

    def capture_balanced(self) -> str:
        """Consume a parenthesised expression starting at the next '(' and return it."""
        tok = self.peek()
        if tok.text != "(":
            raise self.error("expected '('", tok.start)
        pos = tok.start
        depth = 0
        text = self.text
        while pos < len(text):
            ch = text[pos]
            if ch in "\"'":
                m = _TOKEN_RE.match(text, pos)
                if m is None or m.lastgroup != "STRING":
                    raise self.error("unterminated string", pos)
                pos = m.end()
                continue
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
                if depth == 0:
                    self.pos = pos + 1
                    return text[tok.start : pos + 1]
            pos += 1
        raise self.error("unbalanced parentheses", tok.start)

    def capture_until_close_brace(self) -> str:
        """Consume raw text up to (not including) the '}' closing the current group."""
        start = self.pos
        depth = 0
        while True:
            tok = self.peek()
            if tok.kind == "EOF":
                raise self.error("missing '}'", start)
            if tok.text in ("(", "{"):
                depth += 1
            elif tok.text == ")":
                depth -= 1
            elif tok.text == "}":
                if depth == 0:
                    return self.text[start : tok.start].strip()
                depth -= 1
            self.next()


class _Parser:
    def __init__(self, text: str):
        self.lx = _Lexer(text)
        self.service_count = 0

    def unsupported(self, tok: _Token, what: str) -> ParseError:
        return self.lx.error(f"unsupported construct: {what}", tok.start, ErrorKind.UNSUPPORTED)

    def parse(self) -> FederatedQuery:
        lx = self.lx
        prologue_end = self.parse_prologue()
        prologue = lx.text[:prologue_end].strip()
        self.expect_keyword("SELECT")
        projection = self.scan_projection()
        segments = self.parse_where_body()
        tail = lx.text[lx.pos :].strip()
        self.check_tail(tail, lx.pos)
        return FederatedQuery(prologue, projection, tuple(segments), tail)

    def expect_keyword(self, word: str) -> _Token:
        tok = self.lx.next()
        if tok.keyword() != word:
            raise self.lx.error(f"expected {word}, found {tok.text or 'end of input'!r}", tok.start)
        return tok

    def parse_prologue(self) -> int:
        lx = self.lx
        while True:
            tok = lx.peek()
            kw = tok.keyword()
            if kw == "PREFIX":
                lx.next()
                name = lx.next()
                if name.kind != "PNAME" or not name.text.endswith(":"):
                    raise lx.error("expected prefix name", name.start)
                iri = lx.next()
                if iri.kind != "IRIREF":
                    raise lx.error("expected IRI after PREFIX", iri.start)
            elif kw == "BASE":
                lx.next()
                iri = lx.next()
                if iri.kind != "IRIREF":
                    raise lx.error("expected IRI after BASE", iri.start)
            elif kw in ("CONSTRUCT", "ASK", "DESCRIBE"):
                raise self.unsupported(tok, f"{kw} query form")
            else:
                return tok.start

    def scan_projection(self) -> str:
        lx = self.lx
        start = lx.pos
        depth = 0
        while True:
            tok = lx.peek()
            if tok.kind == "EOF":
                raise lx.error("expected WHERE clause", tok.start)
            if depth == 0 and (tok.keyword() == "WHERE" or tok.text == "{"):
                projection = lx.text[start : tok.start].strip()
                if not projection:
                    raise lx.error("empty projection", tok.start)
                if tok.keyword() == "WHERE":
                    lx.next()
                lx.expect("{")
                return projection
            if tok.keyword() == "FROM":
                raise self.unsupported(tok, "FROM dataset clause")
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                depth -= 1
            lx.next()

    def parse_where_body(self) -> list[QuerySegment]:
        lx = self.lx
        segments: list[QuerySegment] = []
        current: list[ServicePattern] = []
        while True:
            tok = lx.peek()
            kw = tok.keyword()
            if tok.text == "}":
                lx.next()
                break
            if tok.text == ".":
                lx.next()
            elif kw == "SERVICE":
                current.append(self.parse_service())
            elif kw == "OPTIONAL":
                if current:
                    segments.append(QuerySegment(tuple(current)))
                    current = []
                segments.append(self.parse_optional())
            elif tok.kind == "EOF":
                raise lx.error("missing '}' at end of query", tok.start)
            else:
                raise self.top_level_error(tok)
        if current:
            segments.append(QuerySegment(tuple(current)))
        if not segments:
            raise lx.error("query contains no SERVICE pattern", lx.pos)
        return segments

    def top_level_error(self, tok: _Token) -> ParseError:
        kw = tok.keyword()
        if kw in ("UNION", "GRAPH", "BIND", "VALUES", "MINUS", "FILTER"):
            return self.unsupported(tok, kw)
        if tok.text == "{":
            return self.unsupported(tok, "nested group graph pattern")
        if tok.kind in ("VAR", "IRIREF", "PNAME", "BNODE", "STRING") or tok.text == "[":
            return self.unsupported(tok, "triple pattern outside SERVICE")
        return self.lx.error(f"unexpected {tok.text!r}", tok.start)

    def parse_optional(self) -> QuerySegment:
        lx = self.lx
        lx.next()
        lx.expect("{")
        services = []
        while True:
            tok = lx.peek()
            if tok.text == "}":
                lx.next()
                break
            if tok.text == ".":
                lx.next()
            elif tok.keyword() == "SERVICE":
                services.append(self.parse_service())
            elif tok.keyword() == "OPTIONAL":
                raise self.unsupported(tok, "nested OPTIONAL")
            elif tok.kind == "EOF":
                raise lx.error("missing '}' after OPTIONAL", tok.start)
            else:
                raise self.top_level_error(tok)
        if not services:
            raise lx.error("OPTIONAL group without SERVICE pattern", lx.pos)
        return QuerySegment(tuple(services), inside_optional=True)

    def parse_service(self) -> ServicePattern:
        lx = self.lx
        lx.next()
        silent = False
        if lx.peek().keyword() == "SILENT":
            lx.next()
            silent = True
        tok = lx.next()
        if tok.kind == "IRIREF":
            endpoint = Term(TermKind.IRI, tok.text)
        elif tok.kind == "PNAME":
            endpoint = Term(TermKind.PREFIXED_NAME, tok.text)
        elif tok.kind == "VAR":
            endpoint = Term(TermKind.VARIABLE, tok.text)
        else:
            raise lx.error(f"expected SERVICE endpoint, found {tok.text!r}", tok.start)
        open_brace = lx.expect("{")
        sub_select = None
        if lx.peek().keyword() == "SELECT":
            sub_select, triples, filters = self.parse_subselect()
        else:
            triples, filters = self.parse_triples_block()
        lx.expect("}")
        if not triples and sub_select is None:
            raise lx.error("SERVICE body contains no triple pattern", open_brace.start)
        index = self.service_count
        self.service_count += 1
        return ServicePattern(endpoint, tuple(triples), tuple(filters), silent, sub_select, index)

    def parse_subselect(self) -> tuple[SubSelect, list[TriplePattern], list[str]]:
        lx = self.lx
        lx.next()
        head_start = lx.pos
        projected: set[str] = set()
        star = False
        depth = 0
        after_as = False
        while True:
            tok = lx.peek()
            if tok.kind == "EOF":
                raise lx.error("unterminated sub-select", tok.start)
            if depth == 0 and (tok.keyword() == "WHERE" or tok.text == "{"):
                break
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                depth -= 1
            elif tok.text == "*" and depth == 0:
                star = True
            elif tok.kind == "VAR" and (depth == 0 or after_as):
                projected.add(tok.text[1:])
            after_as = tok.keyword() == "AS"
            lx.next()
        head = lx.text[head_start : tok.start].strip()
        if not head:
            raise lx.error("empty sub-select projection", tok.start)
        if tok.keyword() == "WHERE":
            lx.next()
        lx.expect("{")
        triples, filters = self.parse_triples_block()
        lx.expect("}")
        modifiers_pos = lx.pos
        modifiers = lx.capture_until_close_brace()
        self.check_tail(modifiers, modifiers_pos)
        if star:
            for t in triples:
                projected |= t.variables()
        return SubSelect(head, frozenset(projected), modifiers), triples, filters

    def parse_triples_block(self) -> tuple[list[TriplePattern], list[str]]:
        lx = self.lx
        triples: list[TriplePattern] = []
        filters: list[str] = []
        while True:
            tok = lx.peek()
            kw = tok.keyword()
            if tok.text == "}":
                return triples, filters
            if tok.text == ".":
                lx.next()
            elif kw == "FILTER":
                lx.next()
                filters.append(self.parse_filter())
            elif kw in _UNSUPPORTED_KEYWORDS:
                what = "nested SERVICE" if kw == "SERVICE" else kw
                raise self.unsupported(tok, what)
            elif tok.text == "{":
                raise self.unsupported(tok, "nested group graph pattern")
            elif tok.kind == "EOF":
                raise lx.error("missing '}'", tok.start)
            else:
                subject = self.parse_term("subject")
                triples.extend(self.parse_predicate_object_list(subject))
                nxt = lx.peek()
                if nxt.text not in (".", "}") and nxt.keyword() != "FILTER":
                    raise lx.error(f"expected '.' or '}}', found {nxt.text!r}", nxt.start)

    def parse_predicate_object_list(self, subject: Term) -> list[TriplePattern]:
        lx = self.lx
        out = []
        while True:
            predicate = self.parse_term("predicate")
            while True:
                obj = self.parse_term("object")
                out.append(self.make_triple(subject, predicate, obj))
                if lx.peek().text != ",":
                    break
                lx.next()
            if lx.peek().text != ";":
                return out
            while lx.peek().text == ";":
                lx.next()
            nxt = lx.peek()
            if nxt.text in (".", "}") or nxt.keyword() == "FILTER":
                return out

    def make_triple(self, s: Term, p: Term, o: Term) -> TriplePattern:
        try:
            return TriplePattern(s, p, o)
        except ValueError as exc:
            raise self.lx.error(str(exc)) from None

    def parse_term(self, role: str) -> Term:
        lx = self.lx
        tok = lx.next()
        kind = tok.kind
        if kind == "VAR":
            return Term(TermKind.VARIABLE, tok.text)
        if kind == "IRIREF":
            return Term(TermKind.IRI, tok.text)
        if kind == "PNAME":
            return Term(TermKind.PREFIXED_NAME, tok.text)
        if kind == "BNODE":
            if role == "predicate":
                raise lx.error("blank node in predicate position", tok.start)
            return Term(TermKind.BLANK_NODE, tok.text)
        if tok.text == "a" and role == "predicate":
            return Term(TermKind.KEYWORD_A, "a")
        if role != "object" and kind in ("STRING", "NUMBER"):
            raise lx.error(f"literal in {role} position", tok.start)
        if kind == "STRING":
            return self.finish_literal(tok)
        if kind == "NUMBER" or tok.text in ("true", "false"):
            return Term(TermKind.LITERAL, tok.text)
        if tok.text in ("[", "("):
            raise self.unsupported(tok, "blank node property list or collection")
        raise lx.error(f"expected {role}, found {tok.text or 'end of input'!r}", tok.start)

    def finish_literal(self, tok: _Token) -> Term:
        lx = self.lx
        text = lx.text
        end = tok.end
        if text.startswith("@", end):
            suffix = _TOKEN_RE.match(text, end)
            if suffix is None or suffix.lastgroup != "LANGTAG":
                raise lx.error("malformed language tag", end)
            lx.pos = suffix.end()
            return Term(TermKind.LITERAL, text[tok.start : suffix.end()], has_language_tag=True)
        if text.startswith("^^", end):
            lx.pos = end + 2
            dt = lx._scan(lx.pos)
            if dt.start != lx.pos or dt.kind not in ("IRIREF", "PNAME"):
                raise lx.error("expected datatype IRI after '^^'", end)
            lx.pos = dt.end
            return Term(TermKind.LITERAL, text[tok.start : dt.end], has_datatype=True)
        return Term(TermKind.LITERAL, tok.text)

    def parse_filter(self) -> str:
        lx = self.lx
        tok = lx.peek()
        if tok.keyword() in ("NOT", "EXISTS"):
            raise self.unsupported(tok, "FILTER EXISTS")
        if tok.text == "(":
            return lx.capture_balanced()
        if tok.kind in ("NAME", "PNAME", "IRIREF"):
            lx.next()
            after = lx.peek()
            if after.text == "(" and after.start == tok.end:
                return tok.text + lx.capture_balanced()
        raise lx.error("expected FILTER expression", tok.start)

    def check_tail(self, tail: str, pos: int) -> None:
        if not tail:
            return
        first = re.match(r"[A-Za-z]+", tail)
        word = first.group().upper() if first else tail[:1]
        if word in ("UNION", "VALUES"):
            raise self.lx.error(f"unsupported construct: {word}", pos, ErrorKind.UNSUPPORTED)
        if word not in _TAIL_KEYWORDS:
            raise self.lx.error(f"unexpected {tail[:20]!r} after query body", pos)
        unquoted = re.sub(r'"(?:[^"\\]|\\.)*"|\'(?:[^\'\\]|\\.)*\'', '""', tail)
        for m in re.finditer(r"\b(LIMIT|OFFSET)\b(\s*)(\S*)", unquoted, re.I):
            if not m.group(3).isdigit():
                raise self.lx.error(f"{m.group(1).upper()} needs a non-negative integer", pos + m.start())


def parse_query(text: str) -> FederatedQuery:
    """Parse query text into a :class:`FederatedQuery`."""
    return _Parser(text).parse()


def _service_body(s: ServicePattern) -> str:
    parts = [str(t) for t in s.triples]
    parts += [f"FILTER {body}" if not body.startswith("(") else f"FILTER{body}" for body in s.filters]
    body = " . ".join(parts)
    if s.sub_select is not None:
        body = f"SELECT {s.sub_select.head} WHERE {{ {body} }}"
        if s.sub_select.modifiers:
            body += " " + s.sub_select.modifiers
    return body


def serialize_service(s: ServicePattern) -> str:
    silent = "SILENT " if s.silent else ""
    return f"SERVICE {silent}{s.endpoint} {{ {_service_body(s)} }}"


def serialize_query(q: FederatedQuery) -> str:
    lines = []
    if q.prologue:
        lines.append(q.prologue)
    lines.append(f"SELECT {q.projection} WHERE {{")
    for seg in q.segments:
        if seg.inside_optional:
            lines.append("  OPTIONAL {")
            lines += [f"    {serialize_service(s)}" for s in seg.services]
            lines.append("  }")
        else:
            lines += [f"  {serialize_service(s)}" for s in seg.services]
    lines.append("}" + (f" {q.tail}" if q.tail else ""))
    return "\n".join(lines) + "\n"


_PREFIX_RE = re.compile(r"PREFIX\s+([^\s:]*):\s*<([^>]*)>", re.IGNORECASE)


def prologue_prefixes(prologue: str) -> dict[str, str]:
    """Prefix label to namespace IRI (without angle brackets)."""
    return {m.group(1): m.group(2) for m in _PREFIX_RE.finditer(prologue)}
