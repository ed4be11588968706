"""Line-oriented N-Triples subset: load and canonical serialization."""

from __future__ import annotations

import re

from .store import Graph, Triple
from .terms import Iri, Literal, TermError, datatype_from_iri, parse_lexical, unescape_string

_WS = re.compile(r"[ \t]*")
_IRI = re.compile(r"<([^<>\"\s]*)>")
_STRING = re.compile(r'"((?:[^"\\\n]|\\.)*)"')
_DTYPE = re.compile(r"\^\^<([^<>\"\s]*)>")


class NTriplesError(ValueError):
    def __init__(self, message: str, line: int, column: int, token: str, source: str | None = None):
        self.line = line
        self.column = column
        self.token = token
        self.source = source
        where = f"{source}:{line}" if source else f"line {line}"
        super().__init__(f"{where}:{column}: {message} (at {token!r})")


def _token_at(text: str, pos: int) -> str:
    m = re.compile(r"\S{1,40}").match(text, pos)
    return m.group(0) if m else "<end of line>"


def parse_line(line: str, lineno: int = 1, source: str | None = None) -> Triple | None:
    """Parse a single line; returns None for blank and comment lines."""
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None

    def fail(msg: str, pos: int) -> NTriplesError:
        return NTriplesError(msg, lineno, pos + 1, _token_at(line, pos), source)

    pos = _WS.match(line, 0).end()
    terms: list = []
    for role in ("subject", "predicate"):
        m = _IRI.match(line, pos)
        if not m or not m.group(1):
            raise fail(f"expected IRI as {role}", pos)
        terms.append(Iri(m.group(1)))
        pos = _WS.match(line, m.end()).end()

    m = _IRI.match(line, pos)
    if m and m.group(1):
        obj = Iri(m.group(1))
        pos = m.end()
    else:
        m = _STRING.match(line, pos)
        if not m:
            raise fail("expected IRI or literal as object", pos)
        try:
            lexical = unescape_string(m.group(1))
        except TermError as exc:
            raise fail(str(exc), pos) from None
        dt_pos = m.end()
        datatype = "string"
        dm = _DTYPE.match(line, dt_pos)
        if dm:
            try:
                datatype = datatype_from_iri(dm.group(1))
            except TermError as exc:
                raise fail(str(exc), dt_pos) from None
            pos = dm.end()
        elif line.startswith("@", dt_pos):
            raise fail("language-tagged literals are not supported", dt_pos)
        else:
            pos = dt_pos
        try:
            obj = Literal(parse_lexical(lexical, datatype), datatype)
        except TermError as exc:
            raise fail(str(exc), m.start()) from None

    pos = _WS.match(line, pos).end()
    if not line.startswith(".", pos):
        raise fail("expected '.'", pos)
    pos = _WS.match(line, pos + 1).end()
    rest = line[pos:].rstrip("\r\n")
    if rest and not rest.startswith("#"):
        raise fail("unexpected trailing content", pos)
    return Triple(terms[0], terms[1], obj)


def load_ntriples(text: str, source: str | None = None) -> Graph:
    """Parse N-Triples text into a graph. Any error rejects the whole input."""
    triples = []
    # only \n (optionally preceded by \r) ends a line; str.splitlines would
    # also split on characters that are legal inside string literals
    for lineno, line in enumerate(text.split("\n"), start=1):
        t = parse_line(line.removesuffix("\r"), lineno, source)
        if t is not None:
            triples.append(t)
    return Graph(triples)


def serialize_ntriples(graph: Graph) -> str:
    """Canonical text: triples sorted by the term order, one per line."""
    return "".join(t.n3() + "\n" for t in graph.sorted_triples())
