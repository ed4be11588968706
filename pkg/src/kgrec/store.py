"""Immutable triple store with SPO / POS / OSP indexes.

A :class:`Graph` is a snapshot: ``insert`` and ``union`` return a new graph
and never touch the receiver. Indexes are built lazily on first lookup, so a
chain of single inserts costs one set copy each rather than three index
rebuilds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .terms import GroundTerm, Iri, Literal, Term, TermError, Variable, term_key

Binding = dict[str, GroundTerm]

# Position orderings for each index; "spo" stores s -> p -> {o}, etc.
INDEX_ORDERS = {
    "spo": (0, 1, 2),
    "pos": (1, 2, 0),
    "osp": (2, 0, 1),
}


@dataclass(frozen=True, slots=True)
class Triple:
    subject: Iri
    predicate: Iri
    object: GroundTerm

    def __post_init__(self) -> None:
        if not isinstance(self.subject, Iri):
            raise TermError(f"triple subject must be an IRI, got {self.subject!r}")
        if not isinstance(self.predicate, Iri):
            raise TermError(f"triple predicate must be an IRI, got {self.predicate!r}")
        if not isinstance(self.object, (Iri, Literal)):
            raise TermError(f"triple object must be an IRI or literal, got {self.object!r}")

    def __iter__(self) -> Iterator[GroundTerm]:
        return iter((self.subject, self.predicate, self.object))

    def sort_key(self) -> tuple:
        return (self.subject.sort_key(), self.predicate.sort_key(), self.object.sort_key())

    def n3(self) -> str:
        return f"{self.subject.n3()} {self.predicate.n3()} {self.object.n3()} ."


@dataclass(frozen=True, slots=True)
class TriplePattern:
    subject: Term
    predicate: Term
    object: Term

    def __iter__(self) -> Iterator[Term]:
        return iter((self.subject, self.predicate, self.object))

    def variables(self) -> list[str]:
        """Variable names in position order, without repeats."""
        seen: list[str] = []
        for t in self:
            if isinstance(t, Variable) and t.name not in seen:
                seen.append(t.name)
        return seen

    def substitute(self, binding: Mapping[str, GroundTerm]) -> "TriplePattern":
        parts = [binding.get(t.name, t) if isinstance(t, Variable) else t for t in self]
        return TriplePattern(*parts)

    def n3(self) -> str:
        return " ".join(t.n3() for t in self) + " ."


def _build_index(triples: Iterable[Triple], order: tuple[int, int, int]) -> dict:
    a, b, c = order
    index: dict = {}
    for t in triples:
        parts = (t.subject, t.predicate, t.object)
        index.setdefault(parts[a], {}).setdefault(parts[b], set()).add(parts[c])
    return index


class Graph:
    """A duplicate-free set of ground triples."""

    __slots__ = ("_triples", "_indexes", "_sizes")

    def __init__(self, triples: Iterable[Triple] = ()) -> None:
        ts = frozenset(triples)
        for t in ts:
            if not isinstance(t, Triple):
                raise TypeError(f"expected Triple, got {type(t).__name__}")
        self._triples = ts
        self._indexes: dict[str, dict] | None = None
        # (index name, first key) -> number of triples under that key
        self._sizes: dict[tuple[str, object], int] = {}

    # -- set behaviour -------------------------------------------------------

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __contains__(self, t: object) -> bool:
        return t in self._triples

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self._triples == other._triples

    def __hash__(self) -> int:
        return hash(self._triples)

    def __repr__(self) -> str:
        return f"<Graph size={len(self)}>"

    @property
    def triples(self) -> frozenset[Triple]:
        return self._triples

    def sorted_triples(self) -> list[Triple]:
        return sorted(self._triples, key=Triple.sort_key)

    # -- snapshots -------------------------------------------------------------

    def insert(self, t: Triple) -> "Graph":
        if not isinstance(t, Triple):
            raise TypeError(f"expected Triple, got {type(t).__name__}")
        if t in self._triples:
            return self
        return Graph(self._triples | {t})

    def union(self, triples: Iterable[Triple]) -> "Graph":
        extra = frozenset(triples)
        if extra <= self._triples:
            return self
        return Graph(self._triples | extra)

    # -- lookup ----------------------------------------------------------------

    def index(self, name: str) -> dict:
        idx = self._indexes
        if idx is None:
            idx = {k: _build_index(self._triples, order) for k, order in INDEX_ORDERS.items()}
            self._indexes = idx
        return idx[name]

    def _walk(self, pattern: TriplePattern, index_name: str) -> Iterator[tuple]:
        """Yield ``(s, p, o)`` tuples whose bound positions agree with pattern."""
        order = INDEX_ORDERS[index_name]
        parts = tuple(pattern)
        keys = [None if isinstance(parts[i], Variable) else parts[i] for i in order]
        level1 = self.index(index_name)
        firsts = [keys[0]] if keys[0] is not None else list(level1)
        for k1 in firsts:
            level2 = level1.get(k1)
            if not level2:
                continue
            seconds = [keys[1]] if keys[1] is not None else list(level2)
            for k2 in seconds:
                level3 = level2.get(k2)
                if not level3:
                    continue
                if keys[2] is not None:
                    thirds = [keys[2]] if keys[2] in level3 else []
                else:
                    thirds = level3
                for k3 in thirds:
                    out = [None, None, None]
                    out[order[0]], out[order[1]], out[order[2]] = k1, k2, k3
                    yield tuple(out)

    def best_index(self, pattern: TriplePattern) -> str:
        """Pick the index whose key prefix covers the most bound positions."""
        bound = [not isinstance(t, Variable) for t in pattern]
        best, best_len = "spo", -1
        for name, order in INDEX_ORDERS.items():
            n = 0
            for pos in order:
                if not bound[pos]:
                    break
                n += 1
            if n > best_len:
                best, best_len = name, n
        return best

    def match(self, pattern: TriplePattern, index: str | None = None) -> list[Binding]:
        """All bindings of the pattern's variables against stored triples.

        ``index`` forces a particular index ("spo", "pos", "osp"); by default
        the best one for the pattern's bound positions is used. The result is
        sorted by the term order of the bound values.
        """
        out = list(self.bindings(pattern, index))
        var_names = pattern.variables()
        out.sort(key=lambda b: tuple(term_key(b[v]) for v in var_names))
        return out

    def bindings(self, pattern: TriplePattern, index: str | None = None) -> Iterator[Binding]:
        """Unordered version of :meth:`match`, for join loops that sort at the end."""
        name = index or self.best_index(pattern)
        if name not in INDEX_ORDERS:
            raise ValueError(f"unknown index {name!r}")
        parts = tuple(pattern)
        for triple in self._walk(pattern, name):
            binding: Binding = {}
            ok = True
            for term, value in zip(parts, triple):
                if isinstance(term, Variable):
                    prev = binding.get(term.name)
                    if prev is None:
                        binding[term.name] = value
                    elif prev != value:
                        ok = False
                        break
            if ok:
                yield binding

    def estimate(self, pattern: TriplePattern) -> int:
        """Cheap upper bound on the number of matches, for join ordering."""
        name = self.best_index(pattern)
        order = INDEX_ORDERS[name]
        parts = tuple(pattern)
        node: object = self.index(name)
        for depth, pos in enumerate(order):
            term = parts[pos]
            if isinstance(term, Variable):
                break
            if depth == 2:
                return 1 if term in node else 0
            node = node.get(term)
            if not node:
                return 0
        else:
            return 1
        if node is self.index(name):
            return len(self)
        if isinstance(node, set):
            return len(node)
        key = (name, parts[order[0]])
        size = self._sizes.get(key)
        if size is None:
            size = self._sizes[key] = sum(len(v) for v in node.values())
        return size

    def objects(self, subject: Iri, predicate: Iri) -> list[GroundTerm]:
        objs = self.index("spo").get(subject, {}).get(predicate, ())
        return sorted(objs, key=term_key)

    def subjects(self, predicate: Iri, obj: GroundTerm) -> list[Iri]:
        subs = self.index("pos").get(predicate, {}).get(obj, ())
        return sorted(subs, key=term_key)


def insert(graph: Graph, t: Triple) -> Graph:
    return graph.insert(t)


def match(graph: Graph, pattern: TriplePattern, index: str | None = None) -> list[Binding]:
    return graph.match(pattern, index=index)
