"""SPARQL subset: basic graph patterns, FILTER expressions, solution modifiers.

Supported grammar::

    PREFIX p: <iri>
    SELECT [DISTINCT] ?v ... | *
    WHERE { triple patterns ('.', ';' and ',' separators) and FILTER clauses }
    [ORDER BY ?v | ASC(?v) | DESC(?v) ...] [LIMIT n] [OFFSET n]

FILTER expressions use ``< <= > >= = !=``, ``&& || !``, ``contains(a, b)``
and ``str(e)``. A filter that raises a type error drops the solution and is
counted in :class:`QueryDiagnostics`.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

from .store import Graph, TriplePattern
from .terms import (
    RDF_TYPE_IRI,
    GroundTerm,
    Iri,
    Literal,
    TermError,
    Variable,
    datatype_from_iri,
    parse_lexical,
    term_key,
    unescape_string,
)

Solution = dict[str, GroundTerm]


class QueryError(ValueError):
    """Query is malformed or violates a structural invariant."""


class QuerySyntaxError(QueryError):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class FilterTypeError(Exception):
    """A filter could not be evaluated for one solution."""


# -- filter expression tree --------------------------------------------------------


@dataclass(frozen=True)
class Compare:
    op: str
    left: "FilterExpr"
    right: "FilterExpr"


@dataclass(frozen=True)
class And:
    left: "FilterExpr"
    right: "FilterExpr"


@dataclass(frozen=True)
class Or:
    left: "FilterExpr"
    right: "FilterExpr"


@dataclass(frozen=True)
class Not:
    expr: "FilterExpr"


@dataclass(frozen=True)
class Contains:
    haystack: "FilterExpr"
    needle: "FilterExpr"


@dataclass(frozen=True)
class Str:
    expr: "FilterExpr"


FilterExpr = Union[Compare, And, Or, Not, Contains, Str, Variable, Literal, Iri]

COMPARISON_OPS = ("<", "<=", ">", ">=", "=", "!=")


def filter_variables(expr: FilterExpr) -> set[str]:
    if isinstance(expr, Variable):
        return {expr.name}
    if isinstance(expr, (Literal, Iri)):
        return set()
    if isinstance(expr, (Compare, And, Or)):
        return filter_variables(expr.left) | filter_variables(expr.right)
    if isinstance(expr, Contains):
        return filter_variables(expr.haystack) | filter_variables(expr.needle)
    return filter_variables(expr.expr)


def any_of(exprs: Sequence[FilterExpr]) -> FilterExpr:
    out = exprs[0]
    for e in exprs[1:]:
        out = Or(out, e)
    return out


def all_of(exprs: Sequence[FilterExpr]) -> FilterExpr:
    out = exprs[0]
    for e in exprs[1:]:
        out = And(out, e)
    return out


def _term_text(t: GroundTerm | Variable, prefixes: Mapping[str, str]) -> str:
    if isinstance(t, Variable):
        return str(t)
    if isinstance(t, Iri):
        if t.value == RDF_TYPE_IRI:
            return "a"
        for pfx, ns in prefixes.items():
            local = t.value[len(ns):]
            if t.value.startswith(ns) and re.fullmatch(r"[\w\-]*", local):
                return f"{pfx}:{local}"
        return t.n3()
    if t.datatype in ("integer", "boolean"):
        return t.lexical
    return t.n3()


def format_filter(expr: FilterExpr, prefixes: Mapping[str, str] | None = None) -> str:
    prefixes = prefixes or {}

    def fmt(e: FilterExpr, top: bool = False) -> str:
        if isinstance(e, (Variable, Literal, Iri)):
            return _term_text(e, prefixes)
        if isinstance(e, Compare):
            return f"{fmt(e.left)} {e.op} {fmt(e.right)}"
        if isinstance(e, And):
            s = f"{fmt(e.left)} && {fmt(e.right)}"
            return s if top else f"({s})"
        if isinstance(e, Or):
            s = f"{fmt(e.left)} || {fmt(e.right)}"
            return s if top else f"({s})"
        if isinstance(e, Not):
            return f"!({fmt(e.expr, True)})"
        if isinstance(e, Contains):
            return f"contains({fmt(e.haystack)}, {fmt(e.needle)})"
        return f"str({fmt(e.expr)})"

    return fmt(expr, True)


# -- query ------------------------------------------------------------------------


@dataclass(frozen=True)
class OrderKey:
    var: str
    descending: bool = False


@dataclass
class Query:
    select_vars: list[str]
    bgp: list[TriplePattern]
    filters: list[FilterExpr] = field(default_factory=list)
    distinct: bool = False
    order_by: list[OrderKey] = field(default_factory=list)
    limit: int | None = None
    offset: int | None = None
    prefixes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.validate()

    def bgp_variables(self) -> list[str]:
        seen: list[str] = []
        for p in self.bgp:
            for v in p.variables():
                if v not in seen:
                    seen.append(v)
        return seen

    def validate(self) -> None:
        known = set(self.bgp_variables())
        for v in self.select_vars:
            if v not in known:
                raise QueryError(f"selected variable ?{v} does not occur in the graph pattern")
        for f in self.filters:
            for v in sorted(filter_variables(f)):
                if v not in known:
                    raise QueryError(f"filter variable ?{v} does not occur in the graph pattern")
        for k in self.order_by:
            if k.var not in known:
                raise QueryError(f"ORDER BY variable ?{k.var} does not occur in the graph pattern")
        for name, n in (("LIMIT", self.limit), ("OFFSET", self.offset)):
            if n is not None and n < 0:
                raise QueryError(f"{name} must be non-negative")

    def to_text(self) -> str:
        lines = [f"PREFIX {p}: <{ns}>" for p, ns in self.prefixes.items()]
        head = "SELECT DISTINCT" if self.distinct else "SELECT"
        lines.append(f"{head} {' '.join('?' + v for v in self.select_vars)}")
        lines.append("WHERE {")
        for p in self.bgp:
            lines.append("  " + " ".join(_term_text(t, self.prefixes) for t in p) + " .")
        for f in self.filters:
            lines.append(f"  FILTER ({format_filter(f, self.prefixes)})")
        tail = "}"
        if self.order_by:
            keys = " ".join(f"DESC(?{k.var})" if k.descending else f"?{k.var}" for k in self.order_by)
            tail += f" ORDER BY {keys}"
        if self.limit is not None:
            tail += f" LIMIT {self.limit}"
        if self.offset is not None:
            tail += f" OFFSET {self.offset}"
        lines.append(tail)
        return "\n".join(lines) + "\n"


# -- parsing -----------------------------------------------------------------------

_Q_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<iri><[^<>"\s{}|^`\\]*>)
  | (?P<string>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<dtype>\^\^)
  | (?P<lang>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
  | (?P<var>[?$][^\W\d][\w]*)
  | (?P<number>[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<op>&&|\|\||<=|>=|!=|=|<|>|!)
  | (?P<pname>(?:[^\W\d][\w\-]*)?:(?:[\w\-]|\.(?=[\w\-]))*)
  | (?P<word>[^\W\d]\w*)
  | (?P<punct>[{}().,;*])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"PREFIX", "SELECT", "DISTINCT", "WHERE", "FILTER", "ORDER", "BY", "ASC", "DESC", "LIMIT", "OFFSET"}


@dataclass
class _QTok:
    kind: str
    text: str
    line: int
    col: int


def _qtokenize(text: str) -> list[_QTok]:
    out: list[_QTok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _Q_TOKEN.match(text, pos)
        if not m:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind, tok = m.lastgroup or "", m.group(0)
        if kind not in ("ws", "comment"):
            if kind == "word" and tok.upper() in _KEYWORDS:
                kind, tok = "kw", tok.upper()
            out.append(_QTok(kind, tok, line, pos - line_start + 1))
        if "\n" in tok:
            line += tok.count("\n")
            line_start = pos + tok.rfind("\n") + 1
        pos = m.end()
    out.append(_QTok("eof", "", line, pos - line_start + 1))
    return out


class _QueryParser:
    def __init__(self, text: str, prefixes: Mapping[str, str] | None):
        self.toks = _qtokenize(text)
        self.i = 0
        self.prefixes: dict[str, str] = dict(prefixes or {})

    @property
    def tok(self) -> _QTok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _QTok | None = None) -> QuerySyntaxError:
        tok = tok or self.tok
        return QuerySyntaxError(f"{msg} (found {tok.text or 'end of input'!r})", tok.line, tok.col)

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def take(self, kind: str, text: str | None = None) -> _QTok:
        if not self.at(kind, text):
            raise self.error(f"expected {text or kind}")
        t = self.tok
        self.i += 1
        return t

    def accept(self, kind: str, text: str | None = None) -> bool:
        if self.at(kind, text):
            self.i += 1
            return True
        return False

    def parse(self) -> Query:
        while self.accept("kw", "PREFIX"):
            tok = self.tok
            if not self.at("pname") or not tok.text.endswith(":"):
                raise self.error("expected prefix name ending in ':'")
            self.i += 1
            iri = self.take("iri").text[1:-1]
            self.prefixes[tok.text[:-1]] = iri
        self.take("kw", "SELECT")
        distinct = self.accept("kw", "DISTINCT")
        select: list[str] = []
        star = self.accept("punct", "*")
        if not star:
            while self.at("var"):
                select.append(self.take("var").text[1:])
            if not select:
                raise self.error("expected projection variables or '*'")
        self.accept("kw", "WHERE")
        bgp, filters = self.parse_group()
        order_by: list[OrderKey] = []
        limit = offset = None
        while not self.at("eof"):
            if self.accept("kw", "ORDER"):
                self.take("kw", "BY")
                while self.at("var") or self.at("kw", "ASC") or self.at("kw", "DESC"):
                    if self.at("var"):
                        order_by.append(OrderKey(self.take("var").text[1:]))
                    else:
                        desc = self.take("kw").text == "DESC"
                        self.take("punct", "(")
                        order_by.append(OrderKey(self.take("var").text[1:], desc))
                        self.take("punct", ")")
                if not order_by:
                    raise self.error("expected ORDER BY key")
            elif self.accept("kw", "LIMIT"):
                limit = self.parse_count()
            elif self.accept("kw", "OFFSET"):
                offset = self.parse_count()
            else:
                raise self.error("unexpected token after graph pattern")
        if star:
            select = []
            for p in bgp:
                for v in p.variables():
                    if v not in select:
                        select.append(v)
        return Query(select, bgp, filters, distinct, order_by, limit, offset, self.prefixes)

    def parse_count(self) -> int:
        tok = self.take("number")
        if not re.fullmatch(r"\d+", tok.text):
            raise self.error("expected a non-negative integer", tok)
        return int(tok.text)

    def parse_group(self) -> tuple[list[TriplePattern], list[FilterExpr]]:
        self.take("punct", "{")
        bgp: list[TriplePattern] = []
        filters: list[FilterExpr] = []
        while not self.accept("punct", "}"):
            if self.accept("kw", "FILTER"):
                if self.at("punct", "("):
                    self.take("punct", "(")
                    filters.append(self.parse_expr())
                    self.take("punct", ")")
                else:
                    filters.append(self.parse_primary())
                self.accept("punct", ".")
                continue
            if self.at("eof"):
                raise self.error("unterminated graph pattern")
            subj = self.parse_node(allow_literal=False)
            while True:
                pred = self.parse_verb()
                while True:
                    obj = self.parse_node(allow_literal=True)
                    bgp.append(TriplePattern(subj, pred, obj))
                    if not self.accept("punct", ","):
                        break
                if not self.accept("punct", ";"):
                    break
                if self.at("punct", ".") or self.at("punct", "}"):
                    break
            if not self.accept("punct", "."):
                if not self.at("punct", "}") and not self.at("kw", "FILTER"):
                    raise self.error("expected '.' after triple pattern")
        return bgp, filters

    def parse_verb(self):
        if self.at("word", "a"):
            self.i += 1
            return Iri(RDF_TYPE_IRI)
        return self.parse_node(allow_literal=False)

    def resolve_pname(self, tok: _QTok) -> Iri:
        pfx, _, local = tok.text.partition(":")
        if pfx not in self.prefixes:
            raise self.error(f"unknown prefix {pfx!r}", tok)
        try:
            return Iri(self.prefixes[pfx] + local)
        except TermError as exc:
            raise self.error(str(exc), tok) from None

    def parse_node(self, allow_literal: bool):
        tok = self.tok
        if tok.kind == "var":
            self.i += 1
            return Variable(tok.text[1:])
        if tok.kind == "iri":
            self.i += 1
            try:
                return Iri(tok.text[1:-1])
            except TermError as exc:
                raise self.error(str(exc), tok) from None
        if tok.kind == "pname":
            self.i += 1
            return self.resolve_pname(tok)
        if allow_literal and tok.kind in ("string", "number") or (
            allow_literal and tok.kind == "word" and tok.text in ("true", "false")
        ):
            return self.parse_literal()
        raise self.error("expected a variable, IRI" + (" or literal" if allow_literal else ""))

    def parse_literal(self) -> Literal:
        tok = self.tok
        self.i += 1
        if tok.kind == "word":
            return Literal(tok.text == "true", "boolean")
        if tok.kind == "number":
            t = tok.text
            if re.fullmatch(r"[+-]?\d+", t):
                return Literal(int(t), "integer")
            return Literal(float(t), "float")
        try:
            lexical = unescape_string(tok.text[1:-1])
        except TermError as exc:
            raise self.error(str(exc), tok) from None
        datatype = "string"
        if self.at("lang"):
            raise self.error("language-tagged literals are not supported")
        if self.accept("dtype"):
            dt_tok = self.tok
            if dt_tok.kind == "iri":
                dt_iri = dt_tok.text[1:-1]
            elif dt_tok.kind == "pname":
                dt_iri = self.resolve_pname(dt_tok).value
            else:
                raise self.error("expected datatype IRI")
            self.i += 1
            try:
                datatype = datatype_from_iri(dt_iri)
            except TermError as exc:
                raise self.error(str(exc), dt_tok) from None
        try:
            return Literal(parse_lexical(lexical, datatype), datatype)
        except TermError as exc:
            raise self.error(str(exc), tok) from None

    # expression grammar: or > and > not > comparison > primary

    def parse_expr(self) -> FilterExpr:
        left = self.parse_and()
        while self.accept("op", "||"):
            left = Or(left, self.parse_and())
        return left

    def parse_and(self) -> FilterExpr:
        left = self.parse_unary()
        while self.accept("op", "&&"):
            left = And(left, self.parse_unary())
        return left

    def parse_unary(self) -> FilterExpr:
        if self.accept("op", "!"):
            return Not(self.parse_unary())
        left = self.parse_primary()
        if self.tok.kind == "op" and self.tok.text in COMPARISON_OPS:
            op = self.take("op").text
            return Compare(op, left, self.parse_primary())
        return left

    def parse_primary(self) -> FilterExpr:
        tok = self.tok
        if self.accept("punct", "("):
            e = self.parse_expr()
            self.take("punct", ")")
            return e
        if tok.kind == "word" and tok.text.lower() in ("contains", "str"):
            self.i += 1
            self.take("punct", "(")
            first = self.parse_expr()
            if tok.text.lower() == "contains":
                self.take("punct", ",")
                second = self.parse_expr()
                self.take("punct", ")")
                return Contains(first, second)
            self.take("punct", ")")
            return Str(first)
        if tok.kind == "var":
            self.i += 1
            return Variable(tok.text[1:])
        if tok.kind in ("iri", "pname"):
            return self.parse_node(allow_literal=False)
        if tok.kind in ("string", "number") or (tok.kind == "word" and tok.text in ("true", "false")):
            return self.parse_literal()
        raise self.error("expected an expression")


def parse_query(text: str, prefixes: Mapping[str, str] | None = None) -> Query:
    """Parse query text. ``prefixes`` predeclares prefixes (none by default)."""
    return _QueryParser(text, prefixes).parse()


# -- evaluation ----------------------------------------------------------------------


@dataclass
class QueryDiagnostics:
    filter_errors: int = 0
    messages: list[str] = field(default_factory=list)
    max_messages: int = 20

    def record(self, message: str) -> None:
        self.filter_errors += 1
        if len(self.messages) < self.max_messages:
            self.messages.append(message)


def _solution_key(sol: Mapping[str, GroundTerm]) -> tuple:
    return tuple((v, term_key(sol[v])) for v in sorted(sol))


def eval_bgp(graph: Graph, bgp: Sequence[TriplePattern]) -> list[Solution]:
    """Natural join of the patterns' matches, in canonical solution order.

    Patterns are joined greedily. A pattern sharing a variable with what is
    already joined goes before a disconnected one (no cross products while a
    connected choice exists); then most fixed positions, then index estimate.
    """
    solutions: list[Solution] = [{}]
    remaining = list(bgp)
    bound: set[str] = set()
    while remaining and solutions:
        def cost(p: TriplePattern) -> tuple:
            fixed = sum(1 for t in p if not isinstance(t, Variable) or t.name in bound)
            connected = not bound or any(v in bound for v in p.variables())
            return (not connected, -fixed, graph.estimate(p))

        best = min(range(len(remaining)), key=lambda i: cost(remaining[i]))
        pat = remaining.pop(best)
        joined: list[Solution] = []
        for sol in solutions:
            for ext in graph.bindings(pat.substitute(sol)):
                if ext:
                    merged = dict(sol)
                    merged.update(ext)
                    joined.append(merged)
                else:
                    joined.append(sol)
        solutions = joined
        bound.update(pat.variables())
    solutions.sort(key=_solution_key)
    return solutions


def _value(expr: FilterExpr, sol: Mapping[str, GroundTerm]) -> GroundTerm | bool:
    if isinstance(expr, Variable):
        v = sol.get(expr.name)
        if v is None:
            raise FilterTypeError(f"unbound variable ?{expr.name}")
        return v
    if isinstance(expr, (Literal, Iri)):
        return expr
    if isinstance(expr, Str):
        v = _value(expr.expr, sol)
        if isinstance(v, bool):
            return Literal("true" if v else "false")
        if isinstance(v, Iri):
            return Literal(v.value)
        return Literal(v.lexical)
    return _truth(expr, sol)


def _ebv(v: GroundTerm | bool) -> bool:
    if isinstance(v, bool):
        return v
    if isinstance(v, Literal):
        if v.datatype == "boolean":
            return v.value
        if v.is_numeric:
            return v.value != 0
        if v.datatype == "string":
            return v.value != ""
    raise FilterTypeError(f"no boolean value for {v.n3()}")


def _compare(op: str, a: GroundTerm | bool, b: GroundTerm | bool) -> bool:
    if isinstance(a, bool):
        a = Literal(a, "boolean")
    if isinstance(b, bool):
        b = Literal(b, "boolean")
    if isinstance(a, Iri) or isinstance(b, Iri):
        if op == "=":
            return a == b
        if op == "!=":
            return a != b
        raise FilterTypeError(f"cannot order {a.n3()} and {b.n3()}")
    if a.is_numeric and b.is_numeric:
        x, y = a.value, b.value
    elif a.datatype == b.datatype:
        x, y = a.value, b.value
    else:
        raise FilterTypeError(f"cannot compare {a.n3()} with {b.n3()}")
    if op == "=":
        return x == y
    if op == "!=":
        return x != y
    if op == "<":
        return x < y
    if op == "<=":
        return x <= y
    if op == ">":
        return x > y
    return x >= y


def _truth(expr: FilterExpr, sol: Mapping[str, GroundTerm]) -> bool:
    if isinstance(expr, And):
        results = []
        for side in (expr.left, expr.right):
            try:
                results.append(_truth(side, sol))
            except FilterTypeError as exc:
                results.append(exc)
        if any(r is False for r in results):
            return False
        for r in results:
            if isinstance(r, FilterTypeError):
                raise r
        return True
    if isinstance(expr, Or):
        results = []
        for side in (expr.left, expr.right):
            try:
                results.append(_truth(side, sol))
            except FilterTypeError as exc:
                results.append(exc)
        if any(r is True for r in results):
            return True
        for r in results:
            if isinstance(r, FilterTypeError):
                raise r
        return False
    if isinstance(expr, Not):
        return not _truth(expr.expr, sol)
    if isinstance(expr, Compare):
        return _compare(expr.op, _value(expr.left, sol), _value(expr.right, sol))
    if isinstance(expr, Contains):
        a, b = _value(expr.haystack, sol), _value(expr.needle, sol)
        if not (isinstance(a, Literal) and isinstance(b, Literal)
                and a.datatype == "string" and b.datatype == "string"):
            raise FilterTypeError("contains() expects string arguments")
        return b.value in a.value
    return _ebv(_value(expr, sol))


def evaluate_filter(expr: FilterExpr, sol: Mapping[str, GroundTerm]) -> bool:
    """True/False for one solution; raises FilterTypeError on a type error."""
    return _truth(expr, sol)


def eval_filter(
    solutions: Iterable[Solution],
    expr: FilterExpr,
    diagnostics: QueryDiagnostics | None = None,
) -> list[Solution]:
    kept = []
    for sol in solutions:
        try:
            ok = _truth(expr, sol)
        except FilterTypeError as exc:
            if diagnostics is not None:
                diagnostics.record(str(exc))
            continue
        if ok:
            kept.append(sol)
    return kept


def execute(
    graph: Graph,
    query: Query,
    diagnostics: QueryDiagnostics | None = None,
) -> list[Solution]:
    """Evaluate a query: BGP, filters, ORDER BY, projection, DISTINCT, OFFSET/LIMIT."""
    if query.limit == 0:
        return []
    solutions = eval_bgp(graph, query.bgp)
    for f in query.filters:
        solutions = eval_filter(solutions, f, diagnostics)
    # eval_bgp output is already in full-solution order, which is the
    # tiebreak; stable sorts on the keys (last key first) keep it.
    for key in reversed(query.order_by):
        solutions.sort(key=lambda s, v=key.var: term_key(s[v]), reverse=key.descending)
    projected = [{v: s[v] for v in query.select_vars} for s in solutions]
    if query.distinct:
        seen = set()
        unique = []
        for s in projected:
            k = tuple(s[v] for v in query.select_vars)
            if k not in seen:
                seen.add(k)
                unique.append(s)
        projected = unique
    start = query.offset or 0
    end = None if query.limit is None else start + query.limit
    return projected[start:end]


# -- export -----------------------------------------------------------------------


def results_to_json(solutions: Sequence[Mapping[str, GroundTerm]], variables: Sequence[str]) -> str:
    rows = [{v: s[v].n3() for v in variables if v in s} for s in solutions]
    return json.dumps(rows, ensure_ascii=False, indent=2) + "\n"


def results_to_csv(solutions: Sequence[Mapping[str, GroundTerm]], variables: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(variables)
    for s in solutions:
        w.writerow([str(s[v]) if v in s else "" for v in variables])
    return buf.getvalue()
