"""SWRL-subset rules: parsing, builtins and forward-chaining saturation.

Rule file grammar::

    @prefix upo: <http://utc.fr/upo/ns#> .
    id: atom ∧ atom ∧ ... -> atom ∧ ... .

Atoms are ``Class(?v)``, ``pred(?v, term)``, ``sameAs(a, b)`` and
``swrlb:name(args)`` / ``temporal:duration(args)`` builtins. ``^`` may be used
for ``∧`` and ``→`` for ``->``. Bare names resolve against the ``:`` prefix.
The rule id must be followed by whitespace after its colon.
"""

from __future__ import annotations

import calendar
import datetime as _dt
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

from . import vocab
from .query import eval_bgp
from .store import Binding, Graph, Triple, TriplePattern
from .terms import GroundTerm, Iri, Literal, Term, TermError, Variable, datatype_from_iri, parse_lexical

DEFAULT_BASE = "http://example.org/ns#"

BUILTIN_NAMES = ("greaterThan", "lessThan", "equal", "contains", "duration")
BUILTIN_PREFIXES = ("swrlb", "temporal", "builtin")
NOW_KEYWORDS = ("maintenant", "now")
MONTH_UNITS = ("mois", "months")
BOOLEAN_KEYWORDS = {"vrai": True, "true": True, "faux": False, "false": False}


class RuleSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class UnsafeRuleError(ValueError):
    def __init__(self, rule_id: str, variable: str, where: str = "head"):
        self.rule_id = rule_id
        self.variable = variable
        super().__init__(f"rule {rule_id}: {where} variable ?{variable} is not bound by the body")


class RuleEvaluationError(RuntimeError):
    def __init__(self, message: str, binding: Mapping[str, GroundTerm] | None = None):
        self.binding = dict(binding or {})
        super().__init__(message)


class BuiltinTypeError(RuleEvaluationError):
    pass


class NonTermination(RuntimeError):
    def __init__(self, rounds: int, pending: int):
        self.rounds = rounds
        self.pending = pending
        super().__init__(f"saturation still derives {pending} new triples after {rounds} rounds")


@dataclass(frozen=True)
class BuiltinCall:
    name: str
    args: tuple[Term, ...]

    def __str__(self) -> str:
        pfx = "temporal" if self.name == "duration" else "swrlb"
        return f"{pfx}:{self.name}({', '.join(_show(a) for a in self.args)})"


@dataclass(frozen=True)
class ClassAtom:
    cls: Iri
    arg: Term

    def __str__(self) -> str:
        return f"{_show(self.cls)}({_show(self.arg)})"


@dataclass(frozen=True)
class PropertyAtom:
    pred: Iri
    arg0: Term
    arg1: Term

    def __str__(self) -> str:
        return f"{_show(self.pred)}({_show(self.arg0)}, {_show(self.arg1)})"


@dataclass(frozen=True)
class SameAsAtom:
    arg0: Term
    arg1: Term

    def __str__(self) -> str:
        return f"sameAs({_show(self.arg0)}, {_show(self.arg1)})"


@dataclass(frozen=True)
class BuiltinAtom:
    call: BuiltinCall

    def __str__(self) -> str:
        return str(self.call)


Atom = Union[ClassAtom, PropertyAtom, SameAsAtom, BuiltinAtom]


def _show(t: Term) -> str:
    if isinstance(t, Variable):
        return str(t)
    if isinstance(t, Iri):
        for pfx, ns in vocab.PREFIXES.items():
            if t.value.startswith(ns):
                return f"{pfx}:{t.value[len(ns):]}"
        return t.n3()
    if t.datatype in ("integer", "float", "boolean"):
        return t.lexical
    if t.datatype == "date":
        return f'"{t.lexical}"^^xsd:date'
    return t.n3()


def atom_variables(atom: Atom) -> list[str]:
    if isinstance(atom, ClassAtom):
        terms: Sequence[Term] = (atom.arg,)
    elif isinstance(atom, PropertyAtom):
        terms = (atom.arg0, atom.arg1)
    elif isinstance(atom, SameAsAtom):
        terms = (atom.arg0, atom.arg1)
    else:
        terms = atom.call.args
    return [t.name for t in terms if isinstance(t, Variable)]


@dataclass(frozen=True)
class Rule:
    id: str
    body: tuple[Atom, ...]
    head: tuple[Atom, ...]

    def __post_init__(self) -> None:
        check_safety(self)

    def __str__(self) -> str:
        body = " ∧ ".join(str(a) for a in self.body)
        head = " ∧ ".join(str(a) for a in self.head)
        return f"{self.id}: {body} -> {head} ."


def _body_bound_variables(rule: Rule) -> set[str]:
    bound: set[str] = set()
    for atom in rule.body:
        if isinstance(atom, (ClassAtom, PropertyAtom)):
            bound.update(atom_variables(atom))
        elif isinstance(atom, BuiltinAtom) and atom.call.name == "duration":
            out = atom.call.args[0]
            if isinstance(out, Variable):
                bound.add(out.name)
    # sameAs propagates binding from one side to the other
    changed = True
    while changed:
        changed = False
        for atom in rule.body:
            if isinstance(atom, SameAsAtom):
                a, b = atom.arg0, atom.arg1
                a_ok = not isinstance(a, Variable) or a.name in bound
                b_ok = not isinstance(b, Variable) or b.name in bound
                for t, other_ok in ((a, b_ok), (b, a_ok)):
                    if isinstance(t, Variable) and t.name not in bound and other_ok:
                        bound.add(t.name)
                        changed = True
    return bound


def check_safety(rule: Rule) -> None:
    """Raise UnsafeRuleError unless every head and builtin-input variable is bound."""
    if not rule.head:
        raise UnsafeRuleError(rule.id, "", "empty head:")
    bound = _body_bound_variables(rule)
    for atom in rule.head:
        if isinstance(atom, BuiltinAtom):
            raise ValueError(f"rule {rule.id}: builtin {atom.call.name} is not allowed in a head")
        for v in atom_variables(atom):
            if v not in bound:
                raise UnsafeRuleError(rule.id, v, "head")
    for atom in rule.body:
        if isinstance(atom, BuiltinAtom):
            args = atom.call.args[1:] if atom.call.name == "duration" else atom.call.args
            for t in args:
                if isinstance(t, Variable) and t.name not in bound:
                    raise UnsafeRuleError(rule.id, t.name, f"builtin {atom.call.name}")
        elif isinstance(atom, SameAsAtom):
            for v in atom_variables(atom):
                if v not in bound:
                    raise UnsafeRuleError(rule.id, v, "sameAs")


# -- parsing -------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<iri><[^<>"\s]*>)
  | (?P<string>"(?:[^"\\\n]|\\.)*"|«[^»\n]*»)
  | (?P<dtype>\^\^)
  | (?P<arrow>->|→)
  | (?P<and>∧|\^)
  | (?P<number>[+-]?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<var>\?[^\W\d][\w\-]*)
  | (?P<directive>@prefix)
  | (?P<name>(?:[^\W\d][\w\-]*)?:[^\W\d][\w\-]*|[^\W\d][\w\-]*)
  | (?P<punct>[(),.:])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise RuleSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup or ""
        tok = m.group(0)
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, tok, line, pos - line_start + 1))
        nl = tok.count("\n")
        if nl:
            line += nl
            line_start = pos + tok.rfind("\n") + 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _RuleParser:
    def __init__(self, text: str, prefixes: Mapping[str, str], base: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.prefixes = dict(prefixes)
        self.prefixes.setdefault("", base)

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def error(self, msg: str, tok: _Token | None = None) -> RuleSyntaxError:
        tok = tok or self.tok
        shown = tok.text or "end of input"
        return RuleSyntaxError(f"{msg} (found {shown!r})", tok.line, tok.col)

    def take(self, kind: str, text: str | None = None) -> _Token:
        tok = self.tok
        if tok.kind != kind or (text is not None and tok.text != text):
            raise self.error(f"expected {text or kind}")
        self.i += 1
        return tok

    def at(self, kind: str, text: str | None = None) -> bool:
        return self.tok.kind == kind and (text is None or self.tok.text == text)

    def parse(self) -> list[Rule]:
        rules: list[Rule] = []
        seen: set[str] = set()
        while not self.at("eof"):
            if self.at("directive"):
                self.parse_prefix()
                continue
            start = self.tok
            rule = self.parse_rule()
            if rule.id in seen:
                raise self.error(f"duplicate rule id {rule.id}", start)
            seen.add(rule.id)
            rules.append(rule)
        return rules

    def parse_prefix(self) -> None:
        self.take("directive")
        name = ""
        if self.at("name"):
            name = self.take("name").text
        self.take("punct", ":")
        iri = self.take("iri").text[1:-1]
        self.take("punct", ".")
        self.prefixes[name] = iri

    def parse_rule(self) -> Rule:
        start = self.tok
        if not self.at("name") or ":" in self.tok.text:
            raise self.error("expected rule id followed by ': '")
        rule_id = self.take("name").text
        self.take("punct", ":")
        body = self.parse_conjunction()
        self.take("arrow")
        head = self.parse_conjunction()
        self.take("punct", ".")
        try:
            return Rule(rule_id, tuple(body), tuple(head))
        except UnsafeRuleError:
            raise
        except ValueError as exc:
            raise RuleSyntaxError(str(exc), start.line, start.col) from None

    def parse_conjunction(self) -> list[Atom]:
        atoms = [self.parse_atom()]
        while self.at("and"):
            self.take("and")
            atoms.append(self.parse_atom())
        return atoms

    def parse_atom(self) -> Atom:
        name_tok = self.tok
        if self.at("iri"):
            self.i += 1
            name = name_tok.text
        else:
            name = self.take("name").text
        self.take("punct", "(")
        args: list[Term] = []
        if not self.at("punct", ")"):
            args.append(self.parse_term())
            while self.at("punct", ","):
                self.take("punct", ",")
                args.append(self.parse_term())
        self.take("punct", ")")

        pfx, _, local = name.rpartition(":")
        if pfx in BUILTIN_PREFIXES:
            return BuiltinAtom(self.make_builtin(local, args, name_tok))
        if name in ("sameAs", "owl:sameAs"):
            if len(args) != 2:
                raise self.error("sameAs takes 2 arguments", name_tok)
            return SameAsAtom(args[0], args[1])
        iri = self.resolve(name, name_tok)
        if len(args) == 1:
            return ClassAtom(iri, args[0])
        if len(args) == 2:
            return PropertyAtom(iri, args[0], args[1])
        raise self.error(f"atom {name} must take 1 or 2 arguments, got {len(args)}", name_tok)

    def make_builtin(self, name: str, args: list[Term], tok: _Token) -> BuiltinCall:
        if name not in BUILTIN_NAMES:
            raise self.error(f"unknown builtin {name}", tok)
        if name == "duration":
            if len(args) != 4:
                raise self.error("duration takes (?out, date, reference, unit)", tok)
            out, _date, ref, unit = args
            if not isinstance(out, Variable):
                raise self.error("duration output must be a variable", tok)
            ref_ok = isinstance(ref, Literal) and (
                ref.datatype == "date" or (ref.datatype == "string" and ref.value in NOW_KEYWORDS)
            )
            if not ref_ok:
                raise self.error("duration reference must be \"maintenant\" or a date", tok)
            if not (isinstance(unit, Literal) and unit.value in MONTH_UNITS):
                raise self.error("duration unit must be \"mois\"", tok)
        elif len(args) != 2:
            raise self.error(f"{name} takes 2 arguments", tok)
        return BuiltinCall(name, tuple(args))

    def resolve(self, name: str, tok: _Token) -> Iri:
        if name.startswith("<"):
            return Iri(name[1:-1])
        pfx, sep, local = name.partition(":")
        if not sep:
            pfx, local = "", name
        if pfx not in self.prefixes:
            raise self.error(f"undeclared prefix {pfx!r}", tok)
        return Iri(self.prefixes[pfx] + local)

    def parse_term(self) -> Term:
        tok = self.tok
        if tok.kind == "var":
            self.i += 1
            return Variable(tok.text[1:])
        if tok.kind == "iri":
            self.i += 1
            return Iri(tok.text[1:-1])
        if tok.kind == "number":
            self.i += 1
            if re.fullmatch(r"[+-]?\d+", tok.text):
                return Literal(int(tok.text), "integer")
            return Literal(float(tok.text), "float")
        if tok.kind == "string":
            self.i += 1
            raw = tok.text[1:-1]
            if tok.text.startswith('"'):
                raw = raw.replace('\\"', '"').replace("\\\\", "\\")
            datatype = "string"
            if self.at("dtype"):
                self.take("dtype")
                dt_tok = self.tok
                if dt_tok.kind == "iri":
                    dt_iri = dt_tok.text[1:-1]
                elif dt_tok.kind == "name":
                    dt_iri = vocab.expand(dt_tok.text, self.prefixes)
                else:
                    raise self.error("expected datatype IRI")
                self.i += 1
                try:
                    datatype = datatype_from_iri(dt_iri)
                except TermError as exc:
                    raise self.error(str(exc), dt_tok) from None
            try:
                return Literal(parse_lexical(raw, datatype), datatype)
            except TermError as exc:
                raise self.error(str(exc), tok) from None
        if tok.kind == "name":
            self.i += 1
            if tok.text in BOOLEAN_KEYWORDS:
                return Literal(BOOLEAN_KEYWORDS[tok.text], "boolean")
            return self.resolve(tok.text, tok)
        raise self.error("expected a term")


def parse_rules(
    text: str,
    prefixes: Mapping[str, str] | None = None,
    base: str = DEFAULT_BASE,
) -> list[Rule]:
    """Parse a rule file. Vocabulary prefixes are predeclared unless overridden."""
    return _RuleParser(text, vocab.PREFIXES if prefixes is None else prefixes, base).parse()


# -- builtins --------------------------------------------------------------------


def _add_months(d: _dt.date, n: int) -> _dt.date:
    """Shift ``d`` by ``n`` calendar months, clamping the day to the month end."""
    y, m = divmod(d.year * 12 + (d.month - 1) + n, 12)
    m += 1
    return _dt.date(y, m, min(d.day, calendar.monthrange(y, m)[1]))


def months_elapsed(start: _dt.date, end: _dt.date) -> int:
    """Largest n with start + n months <= end (negative when end < start)."""
    n = (end.year - start.year) * 12 + (end.month - start.month)
    while _add_months(start, n) > end:
        n -= 1
    while _add_months(start, n + 1) <= end:
        n += 1
    return n


def _resolve(arg: Term, binding: Mapping[str, GroundTerm]) -> GroundTerm:
    if isinstance(arg, Variable):
        value = binding.get(arg.name)
        if value is None:
            raise RuleEvaluationError(f"unbound variable ?{arg.name} in builtin", binding)
        return value
    return arg


def eval_builtin(
    call: BuiltinCall,
    binding: Mapping[str, GroundTerm],
    reference_date: _dt.date | None,
) -> bool | Binding:
    """Evaluate a builtin against a binding.

    Comparisons and ``contains`` return a bool. ``duration`` returns the
    binding extended with its output variable, or a bool when the output
    variable is already bound.
    """
    if call.name == "duration":
        out, date_arg, ref_arg, _unit = call.args
        start = _resolve(date_arg, binding)
        if not (isinstance(start, Literal) and start.datatype == "date"):
            raise BuiltinTypeError(f"duration expects a date, got {start.n3()}", binding)
        if isinstance(ref_arg, Literal) and ref_arg.datatype == "date":
            end = ref_arg.value
        else:
            if reference_date is None:
                raise RuleEvaluationError("duration needs a reference date", binding)
            end = reference_date
        months = Literal(months_elapsed(start.value, end), "integer")
        assert isinstance(out, Variable)
        current = binding.get(out.name)
        if current is not None:
            return current == months
        extended = dict(binding)
        extended[out.name] = months
        return extended

    a, b = (_resolve(x, binding) for x in call.args)
    if call.name == "contains":
        if not (isinstance(a, Literal) and isinstance(b, Literal)
                and a.datatype == "string" and b.datatype == "string"):
            raise BuiltinTypeError(f"contains expects strings, got {a.n3()}, {b.n3()}", binding)
        return b.value in a.value
    if call.name == "equal":
        if isinstance(a, Literal) and isinstance(b, Literal) and a.is_numeric and b.is_numeric:
            return a.value == b.value
        return a == b
    # greaterThan / lessThan
    if not (isinstance(a, Literal) and isinstance(b, Literal)):
        raise BuiltinTypeError(f"{call.name} expects literals, got {a.n3()}, {b.n3()}", binding)
    comparable = (a.is_numeric and b.is_numeric) or (
        a.datatype == b.datatype and a.datatype in ("date", "string")
    )
    if not comparable:
        raise BuiltinTypeError(f"{call.name} cannot compare {a.n3()} with {b.n3()}", binding)
    if call.name == "greaterThan":
        return a.value > b.value
    return a.value < b.value


# -- evaluation -----------------------------------------------------------------


def _atom_pattern(atom: ClassAtom | PropertyAtom) -> TriplePattern:
    if isinstance(atom, ClassAtom):
        return TriplePattern(atom.arg, vocab.RDF_TYPE, atom.cls)
    return TriplePattern(atom.arg0, atom.pred, atom.arg1)


def _same_as_candidates(graph: Graph, term: GroundTerm) -> list[GroundTerm]:
    out = [term]
    if isinstance(term, Iri):
        out.extend(graph.objects(term, vocab.OWL_SAMEAS))
    out.extend(graph.subjects(vocab.OWL_SAMEAS, term))
    seen: list[GroundTerm] = []
    for t in out:
        if t not in seen:
            seen.append(t)
    return seen


def _ready(atom: Atom, binding: Mapping[str, GroundTerm]) -> bool:
    if isinstance(atom, SameAsAtom):
        return any(not isinstance(t, Variable) or t.name in binding for t in (atom.arg0, atom.arg1))
    assert isinstance(atom, BuiltinAtom)
    args = atom.call.args
    needed = args[1:] if atom.call.name == "duration" else args
    return all(not isinstance(t, Variable) or t.name in binding for t in needed)


def _eval_side_atom(graph: Graph, atom: Atom, binding: Binding, reference_date) -> list[Binding]:
    if isinstance(atom, SameAsAtom):
        a, b = atom.arg0, atom.arg1
        ga = binding.get(a.name) if isinstance(a, Variable) else a
        gb = binding.get(b.name) if isinstance(b, Variable) else b
        if ga is not None and gb is not None:
            return [binding] if gb in _same_as_candidates(graph, ga) else []
        known, free = (ga, b) if ga is not None else (gb, a)
        assert isinstance(free, Variable) and known is not None
        out = []
        for cand in _same_as_candidates(graph, known):
            ext = dict(binding)
            ext[free.name] = cand
            out.append(ext)
        return out
    assert isinstance(atom, BuiltinAtom)
    result = eval_builtin(atom.call, binding, reference_date)
    if isinstance(result, dict):
        return [result]
    return [binding] if result else []


def body_solutions(graph: Graph, rule: Rule, reference_date: _dt.date | None) -> list[Binding]:
    relational = [_atom_pattern(a) for a in rule.body if isinstance(a, (ClassAtom, PropertyAtom))]
    side = [a for a in rule.body if isinstance(a, (SameAsAtom, BuiltinAtom))]
    out: list[Binding] = []
    for sol in eval_bgp(graph, relational):
        frontier = [sol]
        pending = list(side)
        while pending and frontier:
            idx = next((i for i, a in enumerate(pending) if _ready(a, frontier[0])), None)
            if idx is None:
                raise RuleEvaluationError(
                    f"rule {rule.id}: cannot order body atoms {', '.join(map(str, pending))}",
                    frontier[0],
                )
            atom = pending.pop(idx)
            nxt: list[Binding] = []
            for b in frontier:
                nxt.extend(_eval_side_atom(graph, atom, b, reference_date))
            frontier = nxt
        out.extend(frontier)
    return out


def _ground_head(atom: Atom, binding: Mapping[str, GroundTerm]) -> Triple:
    def g(t: Term) -> GroundTerm:
        return binding[t.name] if isinstance(t, Variable) else t

    try:
        if isinstance(atom, ClassAtom):
            return Triple(g(atom.arg), vocab.RDF_TYPE, atom.cls)
        if isinstance(atom, PropertyAtom):
            return Triple(g(atom.arg0), atom.pred, g(atom.arg1))
        if isinstance(atom, SameAsAtom):
            return Triple(g(atom.arg0), vocab.OWL_SAMEAS, g(atom.arg1))
    except TermError as exc:
        raise RuleEvaluationError(f"head {atom} does not ground to a triple: {exc}", binding) from None
    raise RuleEvaluationError(f"unsupported head atom {atom}", binding)


def apply_rule_once(graph: Graph, rule: Rule, reference_date: _dt.date | None = None) -> set[Triple]:
    """Ground head triples derived by one application of ``rule`` that are new to ``graph``."""
    new: set[Triple] = set()
    for binding in body_solutions(graph, rule, reference_date):
        for atom in rule.head:
            t = _ground_head(atom, binding)
            if t not in graph:
                new.add(t)
    return new


@dataclass
class Saturation:
    graph: Graph
    rounds: int
    derived: frozenset[Triple] = field(default_factory=frozenset)


def run_saturation(
    graph: Graph,
    rules: Iterable[Rule],
    reference_date: _dt.date | None = None,
    max_rounds: int = 100,
) -> Saturation:
    """Naive round-robin forward chaining to a fixpoint.

    Every rule in a round sees the same snapshot, so the result does not
    depend on rule order. ``rounds`` counts rounds that added triples.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    rules = list(rules)
    current = graph
    derived: set[Triple] = set()
    for rounds in range(max_rounds + 1):
        new: set[Triple] = set()
        for rule in rules:
            new |= apply_rule_once(current, rule, reference_date)
        if not new:
            return Saturation(current, rounds, frozenset(derived))
        if rounds == max_rounds:
            raise NonTermination(max_rounds, len(new))
        derived |= new
        current = current.union(new)
    raise AssertionError("unreachable")


def saturate(
    graph: Graph,
    rules: Iterable[Rule],
    reference_date: _dt.date | None = None,
    max_rounds: int = 100,
) -> Graph:
    return run_saturation(graph, rules, reference_date, max_rounds).graph
