"""RDF terms: IRIs, typed literals and variables, plus the total order over them.

Literals compare by ``(datatype, parsed value)``, so ``"05"^^xsd:integer`` and
``"5"^^xsd:integer`` are the same term. The lexical form is always regenerated
from the parsed value, which keeps serialization canonical.
"""

from __future__ import annotations

import datetime as _dt
import math
import re
from dataclasses import dataclass
from typing import Any, Union

XSD = "http://www.w3.org/2001/XMLSchema#"
RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
OWL = "http://www.w3.org/2002/07/owl#"

RDF_TYPE_IRI = RDF + "type"
OWL_SAMEAS_IRI = OWL + "sameAs"

DATATYPES = ("boolean", "date", "float", "integer", "string")

# Accepted datatype IRIs. The short "xsd:..." spellings appear in hand-written
# N-Triples, so they are tolerated on input; output always uses the full IRI.
_DATATYPE_ALIASES = {
    "integer": "integer",
    "int": "integer",
    "long": "integer",
    "short": "integer",
    "float": "float",
    "double": "float",
    "decimal": "float",
    "string": "string",
    "boolean": "boolean",
    "date": "date",
}
DATATYPE_IRIS = {dt: XSD + dt for dt in DATATYPES}

_INT_RE = re.compile(r"[+-]?\d+\Z")
_FLOAT_RE = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?\Z")
_DATE_RE = re.compile(r"\d{4}-\d{2}-\d{2}\Z")


class TermError(ValueError):
    """A term violates its invariants (bad IRI, unparsable literal...)."""


def datatype_from_iri(iri: str) -> str:
    """Map a datatype IRI (full or ``xsd:``-prefixed) to a datatype name."""
    for prefix in (XSD, "xsd:"):
        if iri.startswith(prefix):
            name = _DATATYPE_ALIASES.get(iri[len(prefix):])
            if name is not None:
                return name
    raise TermError(f"unsupported datatype IRI: {iri}")


def parse_lexical(lexical: str, datatype: str) -> Any:
    """Parse a lexical form under ``datatype`` into a Python value."""
    if datatype == "string":
        return lexical
    if datatype == "integer":
        if not _INT_RE.match(lexical):
            raise TermError(f"invalid integer lexical form: {lexical!r}")
        return int(lexical)
    if datatype == "float":
        if not _FLOAT_RE.match(lexical):
            raise TermError(f"invalid float lexical form: {lexical!r}")
        return float(lexical)
    if datatype == "boolean":
        if lexical in ("true", "1"):
            return True
        if lexical in ("false", "0"):
            return False
        raise TermError(f"invalid boolean lexical form: {lexical!r}")
    if datatype == "date":
        if not _DATE_RE.match(lexical):
            raise TermError(f"invalid date lexical form: {lexical!r}")
        try:
            return _dt.date.fromisoformat(lexical)
        except ValueError as exc:
            raise TermError(f"invalid date: {lexical!r}") from exc
    raise TermError(f"unknown datatype: {datatype!r}")


@dataclass(frozen=True, slots=True)
class Iri:
    value: str

    def __post_init__(self) -> None:
        if not isinstance(self.value, str) or not self.value:
            raise TermError("IRI must be a non-empty string")
        if any(c.isspace() for c in self.value) or any(c in '<>"' for c in self.value):
            raise TermError(f"IRI contains whitespace or reserved characters: {self.value!r}")

    def sort_key(self) -> tuple:
        return (0, self.value)

    def n3(self) -> str:
        return f"<{self.value}>"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, slots=True)
class Literal:
    """A typed literal. ``value`` is the parsed Python value."""

    value: Any
    datatype: str = "string"

    def __post_init__(self) -> None:
        dt, v = self.datatype, self.value
        if dt not in DATATYPES:
            raise TermError(f"unknown datatype: {dt!r}")
        ok = (
            (dt == "string" and isinstance(v, str))
            or (dt == "integer" and isinstance(v, int) and not isinstance(v, bool))
            or (dt == "float" and isinstance(v, (int, float)) and not isinstance(v, bool))
            or (dt == "boolean" and isinstance(v, bool))
            or (dt == "date" and isinstance(v, _dt.date) and not isinstance(v, _dt.datetime))
        )
        if not ok:
            raise TermError(f"value {v!r} does not fit datatype {dt}")
        if dt == "float":
            v = float(v)
            if not math.isfinite(v):
                raise TermError("float literals must be finite")
            if v == 0.0:
                v = 0.0  # fold -0.0
            object.__setattr__(self, "value", v)

    @classmethod
    def parse(cls, lexical: str, datatype: str = "string") -> "Literal":
        return cls(parse_lexical(lexical, datatype), datatype)

    @classmethod
    def of(cls, value: Any) -> "Literal":
        """Build a literal from a Python value, inferring the datatype."""
        if isinstance(value, bool):
            return cls(value, "boolean")
        if isinstance(value, int):
            return cls(value, "integer")
        if isinstance(value, float):
            return cls(value, "float")
        if isinstance(value, _dt.date):
            return cls(value, "date")
        if isinstance(value, str):
            return cls(value, "string")
        raise TermError(f"no literal datatype for {type(value).__name__}")

    @property
    def lexical(self) -> str:
        v = self.value
        if self.datatype == "boolean":
            return "true" if v else "false"
        if self.datatype == "date":
            return v.isoformat()
        if self.datatype == "float":
            return repr(v)
        return str(v)

    @property
    def is_numeric(self) -> bool:
        return self.datatype in ("integer", "float")

    def sort_key(self) -> tuple:
        return (1, self.datatype, self.value)

    def n3(self) -> str:
        body = '"' + escape_string(self.lexical) + '"'
        if self.datatype == "string":
            return body
        return f"{body}^^<{DATATYPE_IRIS[self.datatype]}>"

    def __str__(self) -> str:
        return self.lexical


@dataclass(frozen=True, slots=True)
class Variable:
    name: str

    def __post_init__(self) -> None:
        if not self.name or self.name.startswith("?"):
            raise TermError(f"bad variable name: {self.name!r}")

    def sort_key(self) -> tuple:
        return (2, self.name)

    def n3(self) -> str:
        return "?" + self.name

    def __str__(self) -> str:
        return "?" + self.name


Term = Union[Iri, Literal, Variable]
GroundTerm = Union[Iri, Literal]


def term_key(term: Term) -> tuple:
    """Sort key realizing the total order: IRIs < literals < variables."""
    return term.sort_key()


def is_ground(term: Term) -> bool:
    return not isinstance(term, Variable)


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t", "'": "'"}


def _escape_char(c: str) -> str:
    if c in _ESCAPES:
        return _ESCAPES[c]
    # other control and line-separator characters would break line-based readers
    if ord(c) < 0x20 or c in "\x7f\x85\u2028\u2029":
        return f"\\u{ord(c):04X}"
    return c


def escape_string(s: str) -> str:
    return "".join(_escape_char(c) for c in s)


def unescape_string(s: str) -> str:
    out = []
    i = 0
    while i < len(s):
        c = s[i]
        if c != "\\":
            out.append(c)
            i += 1
            continue
        if i + 1 >= len(s):
            raise TermError("dangling backslash in string")
        nxt = s[i + 1]
        if nxt in _UNESCAPES:
            out.append(_UNESCAPES[nxt])
            i += 2
        elif nxt in "uU":
            width = 4 if nxt == "u" else 8
            hexpart = s[i + 2:i + 2 + width]
            if len(hexpart) != width or not all(h in "0123456789abcdefABCDEF" for h in hexpart):
                raise TermError(f"bad unicode escape: \\{nxt}{hexpart}")
            out.append(chr(int(hexpart, 16)))
            i += 2 + width
        else:
            raise TermError(f"unknown escape: \\{nxt}")
    return "".join(out)
