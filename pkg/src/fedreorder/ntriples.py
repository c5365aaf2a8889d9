"""Line-based N-Triples reader and canonical ground-term strings.

Ground terms are plain strings in N-Triples syntax (``<iri>``, ``_:b0``,
``"lex"@en``, ``"5"^^<...#integer>``) after normalising string escapes, so
two spellings of the same RDF term compare equal as strings.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Iterator

XSD = "http://www.w3.org/2001/XMLSchema#"
RDF_TYPE = "<http://www.w3.org/1999/02/22-rdf-syntax-ns#type>"
XSD_STRING = f"<{XSD}string>"
NUMERIC_TYPES = {f"<{XSD}{t}>" for t in (
    "integer", "decimal", "double", "float", "int", "long", "short", "byte",
    "nonNegativeInteger", "positiveInteger", "negativeInteger", "nonPositiveInteger",
    "unsignedInt", "unsignedLong", "unsignedShort", "unsignedByte",
)}

Triple = tuple[str, str, str]


class NTriplesError(ValueError):
    def __init__(self, source: str, line: int, message: str):
        super().__init__(f"{source}:{line}: {message}")
        self.source = source
        self.line = line


_ECHAR = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_ESCAPE_RE = re.compile(r"\\(u[0-9A-Fa-f]{4}|U[0-9A-Fa-f]{8}|.)", re.S)


def unescape(text: str) -> str:
    def sub(m: re.Match[str]) -> str:
        code = m.group(1)
        if code[0] in "uU" and len(code) > 1:
            return chr(int(code[1:], 16))
        if code not in _ECHAR:
            raise ValueError(f"invalid escape \\{code}")
        return _ECHAR[code]

    return _ESCAPE_RE.sub(sub, text)


def escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\r", "\\r")


def make_literal(value: str, lang: str | None = None, datatype: str | None = None) -> str:
    """Canonical literal string; ``datatype`` is a bracketed IRI."""
    out = f'"{escape(value)}"'
    if lang:
        return f"{out}@{lang.lower()}"
    if datatype and datatype != XSD_STRING:
        return f"{out}^^{datatype}"
    return out


def split_literal(term: str) -> tuple[str, str | None, str | None]:
    """Inverse of :func:`make_literal`: (lexical value, language, datatype)."""
    end = term.rfind('"')
    value = unescape(term[1:end])
    suffix = term[end + 1 :]
    if suffix.startswith("@"):
        return value, suffix[1:], None
    if suffix.startswith("^^"):
        return value, None, suffix[2:]
    return value, None, None


_IRI = r"<[^<>\"{}|^`\\\x00-\x20]*>"
_BNODE = r"_:[A-Za-z0-9_](?:[A-Za-z0-9_\-.]*[A-Za-z0-9_\-])?"
_LITERAL = r'"(?:[^"\\\n\r]|\\.)*"(?:@[A-Za-z]+(?:-[A-Za-z0-9]+)*|\^\^' + _IRI + r")?"
_LINE_RE = re.compile(
    rf"\s*({_IRI}|{_BNODE})\s*({_IRI})\s*({_IRI}|{_BNODE}|{_LITERAL})\s*\.\s*(?:#.*)?"
)
_LITERAL_RE = re.compile(r'"((?:[^"\\]|\\.)*)"(?:@([A-Za-z]+(?:-[A-Za-z0-9]+)*)|\^\^(' + _IRI + r"))?")


def canonical_object(term: str) -> str:
    if not term.startswith('"'):
        return term
    m = _LITERAL_RE.fullmatch(term)
    assert m is not None
    return make_literal(unescape(m.group(1)), m.group(2), m.group(3))


def parse_ntriples(lines: Iterable[str], source: str = "<string>") -> Iterator[Triple]:
    for lineno, line in enumerate(lines, 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _LINE_RE.fullmatch(line.rstrip("\r\n"))
        if m is None:
            raise NTriplesError(source, lineno, f"malformed triple: {stripped[:80]!r}")
        try:
            obj = canonical_object(m.group(3))
        except ValueError as exc:
            raise NTriplesError(source, lineno, str(exc)) from None
        yield m.group(1), m.group(2), obj


def format_ntriples(triples: Iterable[Triple]) -> str:
    return "".join(f"{s} {p} {o} .\n" for s, p, o in triples)
