"""Constraint-based recommendation over a saturated knowledge graph.

A user's preferences become filter constraints, one per label in
:data:`LABELS`. The active constraints compile into a single constraint
query selecting ``?auto``; its distinct answers are the recommendations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

from . import vocab
from .query import (
    And,
    Compare,
    Contains,
    FilterExpr,
    Query,
    QueryDiagnostics,
    Str,
    any_of,
    execute,
)
from .rules import Rule
from .store import Graph, TriplePattern
from .terms import Iri, Literal, Variable

LABELS = ("Seats", "VehicleType", "Brand", "Color", "Mileage", "Price")

# Order in which constraint fragments are laid out in a compiled query.
_QUERY_ORDER = ("Color", "Seats", "Brand", "VehicleType", "Mileage", "Price")

ITEM_VAR = "auto"


class MissingPreference(ValueError):
    def __init__(self, label: str, user_id: str = ""):
        self.label = label
        super().__init__(f"profile {user_id or '?'} has no value for {label}")


class UnknownLabel(ValueError):
    pass


class Inconsistent(Exception):
    """The constraint query has no solution."""

    def __init__(self, task: "RecommendationTask", active: Iterable[str]):
        self.task = task
        self.active = frozenset(active)
        super().__init__(
            f"no item satisfies {sorted(self.active)} for user {task.profile.user_id}"
        )


# -- schema -----------------------------------------------------------------------


@dataclass(frozen=True)
class PropertyPath:
    properties: tuple[Iri, ...]
    variables: tuple[str, ...]  # one per hop; the last holds the value

    def __post_init__(self) -> None:
        if not self.properties or len(self.properties) != len(self.variables):
            raise ValueError("a property path needs one variable per property")

    @property
    def value_var(self) -> str:
        return self.variables[-1]

    def patterns(self, item: str = ITEM_VAR) -> list[TriplePattern]:
        out = []
        subject = Variable(item)
        for prop, var in zip(self.properties, self.variables):
            out.append(TriplePattern(subject, prop, Variable(var)))
            subject = Variable(var)
        return out


ITEM_VARIABLES = ("nom", "prix", "typeDeCarrosserie", "nombreDeSièges", "annéeDuModèle", "marque", "kilométrage")


@dataclass(frozen=True)
class CatalogSchema:
    """Where each item variable lives in the graph vocabulary."""

    item_class: Iri
    paths: Mapping[str, PropertyPath]

    def __post_init__(self) -> None:
        missing = [v for v in ITEM_VARIABLES if v not in self.paths]
        if missing:
            raise ValueError(f"schema lacks mappings for {missing}")
        known = set(vocab.PROPERTIES)
        for name, path in self.paths.items():
            for p in path.properties:
                if p not in known:
                    raise ValueError(f"schema entry {name} uses unknown property {p}")

    def path(self, name: str) -> PropertyPath:
        return self.paths[name]


DEFAULT_SCHEMA = CatalogSchema(
    item_class=vocab.AUTOMOBILE,
    paths={
        "nom": PropertyPath((vocab.NOM,), ("nom",)),
        "prix": PropertyPath((vocab.ESTIMATION, vocab.A_VALEUR_MONETAIRE), ("estimation", "prix")),
        "typeDeCarrosserie": PropertyPath((vocab.STYLE_VEHICULE,), ("style",)),
        "nombreDeSièges": PropertyPath((vocab.NOMBRE_DE_PLACES, vocab.A_VALEUR_ENTIER), ("places", "valeurPlaces")),
        "annéeDuModèle": PropertyPath((vocab.ANNEE_DU_MODELE,), ("annee",)),
        "marque": PropertyPath((vocab.A_FABRICANT,), ("marque",)),
        "kilométrage": PropertyPath(
            (vocab.KILOMETRAGE_ODOMETRE, vocab.A_VALEUR_FLOAT), ("kilometrage", "valeurKilometrage")
        ),
        # not an item variable proper, but the color constraint reads it
        "couleur": PropertyPath((vocab.COULEUR,), ("couleur",)),
    },
)


# -- profiles ---------------------------------------------------------------------


def resolve_vehicle_type(value: str) -> Iri:
    """``"suv"``, ``"upo:SUV"`` and full IRIs all name a vehicle type."""
    if value.lower() in vocab.VEHICLE_TYPES:
        return vocab.VEHICLE_TYPES[value.lower()]
    return Iri(vocab.expand(value))


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    vehicle_type: str | None = None
    colors: tuple[str, ...] = ()
    profile: str | None = None
    seats: int | None = None
    max_mileage: int | None = None
    brand: str | None = None
    max_budget: int | None = None
    min_budget: int | None = None
    rank: tuple[str, ...] = ()
    preference_node: str | None = None
    # vehicle types inferred for this user's preference node (rule output)
    derived_vehicle_types: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for name in ("seats", "max_mileage", "max_budget", "min_budget"):
            v = getattr(self, name)
            if v is not None and (isinstance(v, bool) or not isinstance(v, int) or v <= 0):
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.min_budget is not None and self.max_budget is not None and self.min_budget > self.max_budget:
            raise ValueError("min_budget exceeds max_budget")
        if self.rank:
            if sorted(self.rank) != sorted(self.supplied_labels()):
                raise ValueError(
                    f"rank {list(self.rank)} is not a permutation of supplied labels "
                    f"{sorted(self.supplied_labels())}"
                )

    def supplied_labels(self) -> frozenset[str]:
        present = {
            "Seats": self.seats is not None,
            "VehicleType": self.vehicle_type is not None,
            "Brand": self.brand is not None,
            "Color": bool(self.colors),
            "Mileage": self.max_mileage is not None,
            "Price": self.max_budget is not None,
        }
        return frozenset(k for k, v in present.items() if v)

    def preference_order(self) -> tuple[str, ...]:
        """Supplied labels, most important first."""
        if self.rank:
            return self.rank
        supplied = self.supplied_labels()
        return tuple(label for label in LABELS if label in supplied)

    def allowed_vehicle_types(self) -> tuple[Iri, ...]:
        if self.vehicle_type is None:
            return ()
        out = [resolve_vehicle_type(self.vehicle_type)]
        for t in self.derived_vehicle_types:
            iri = resolve_vehicle_type(t)
            if iri not in out:
                out.append(iri)
        return tuple(out)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "UserProfile":
        colors = data.get("couleur") or ()
        if isinstance(colors, str):
            colors = (colors,)
        return cls(
            user_id=str(data["user_id"]),
            vehicle_type=data.get("typeDeVehicule"),
            colors=tuple(colors),
            profile=data.get("profil"),
            seats=data.get("nombreDeSieges"),
            max_mileage=data.get("maxKilometrage"),
            brand=data.get("marque"),
            max_budget=data.get("maxBudget"),
            min_budget=data.get("minBudget"),
            rank=tuple(data.get("rank") or ()),
            preference_node=data.get("preference"),
        )

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"user_id": self.user_id}
        pairs = (
            ("typeDeVehicule", self.vehicle_type),
            ("couleur", list(self.colors) or None),
            ("profil", self.profile),
            ("nombreDeSieges", self.seats),
            ("maxKilometrage", self.max_mileage),
            ("marque", self.brand),
            ("maxBudget", self.max_budget),
            ("minBudget", self.min_budget),
            ("rank", list(self.rank) or None),
            ("preference", self.preference_node),
        )
        for k, v in pairs:
            if v is not None:
                out[k] = v
        return out


def load_profiles(text: str) -> list[UserProfile]:
    """Read profiles from a JSON array or JSON Lines (one record per user)."""
    stripped = text.strip()
    if not stripped:
        return []
    if stripped.startswith("["):
        records = json.loads(stripped)
    else:
        records = [json.loads(line) for line in stripped.splitlines() if line.strip()]
    profiles = [UserProfile.from_dict(r) for r in records]
    ids = [p.user_id for p in profiles]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate user_id in profile file")
    return profiles


def dump_profiles(profiles: Iterable[UserProfile]) -> str:
    return "".join(json.dumps(p.to_dict(), ensure_ascii=False, sort_keys=True) + "\n" for p in profiles)


def with_graph_preferences(profile: UserProfile, graph: Graph) -> UserProfile:
    """Attach vehicle types the graph records for the user's preference node.

    After saturation this picks up types inferred by the domain rules, which
    widen (never narrow) an explicit vehicle-type preference.
    """
    if not profile.preference_node:
        return profile
    node = Iri(vocab.expand(profile.preference_node))
    derived = tuple(
        o.value for o in graph.objects(node, vocab.A_UN_TYPE_DE_VEHICULE_PREFERE) if isinstance(o, Iri)
    )
    return replace(profile, derived_vehicle_types=derived)


# -- constraints --------------------------------------------------------------------


@dataclass(frozen=True)
class PreferenceConstraint:
    label: str
    patterns: tuple[TriplePattern, ...]
    filter: FilterExpr | None = None


def compile_constraint(
    label: str,
    profile: UserProfile,
    schema: CatalogSchema = DEFAULT_SCHEMA,
    item: str = ITEM_VAR,
) -> PreferenceConstraint:
    if label not in LABELS:
        raise UnknownLabel(f"unknown constraint label {label!r}")
    if label not in profile.supplied_labels():
        raise MissingPreference(label, profile.user_id)

    if label == "Price":
        path = schema.path("prix")
        value = Variable(path.value_var)
        expr: FilterExpr = Compare("<=", value, Literal(profile.max_budget, "integer"))
        if profile.min_budget is not None:
            expr = And(expr, Compare(">=", value, Literal(profile.min_budget, "integer")))
        return PreferenceConstraint(label, tuple(path.patterns(item)), expr)

    if label == "Mileage":
        path = schema.path("kilométrage")
        expr = Compare("<", Variable(path.value_var), Literal(profile.max_mileage, "integer"))
        return PreferenceConstraint(label, tuple(path.patterns(item)), expr)

    if label == "Seats":
        path = schema.path("nombreDeSièges")
        pats = path.patterns(item)
        last = pats[-1]
        pats[-1] = TriplePattern(last.subject, last.predicate, Literal(profile.seats, "integer"))
        return PreferenceConstraint(label, tuple(pats), None)

    if label == "Color":
        path = schema.path("couleur")
        stems: list[str] = []
        for c in profile.colors:
            s = vocab.color_stem(c)
            if s not in stems:
                stems.append(s)
        expr = any_of([Contains(Variable(path.value_var), Literal(s)) for s in stems])
        return PreferenceConstraint(label, tuple(path.patterns(item)), expr)

    if label == "Brand":
        path = schema.path("marque")
        assert profile.brand is not None
        expr = Contains(Str(Variable(path.value_var)), Literal(profile.brand.strip().lower()))
        return PreferenceConstraint(label, tuple(path.patterns(item)), expr)

    # VehicleType
    path = schema.path("typeDeCarrosserie")
    types = profile.allowed_vehicle_types()
    if len(types) == 1:
        pat = TriplePattern(Variable(item), path.properties[0], types[0])
        return PreferenceConstraint(label, (pat,), None)
    pats = path.patterns(item)
    expr = any_of([Compare("=", Variable(path.value_var), t) for t in types])
    return PreferenceConstraint(label, tuple(pats), expr)


@dataclass
class RecommendationTask:
    """CSP for one user: preference constraints plus the rule set they run beside."""

    profile: UserProfile
    graph: Graph
    schema: CatalogSchema = DEFAULT_SCHEMA
    rules: tuple[Rule, ...] = ()
    constraints: dict[str, PreferenceConstraint] = field(default_factory=dict)
    diagnostics: QueryDiagnostics = field(default_factory=QueryDiagnostics)
    _counts: dict[frozenset[str], int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.profile = with_graph_preferences(self.profile, self.graph)
        if not self.constraints:
            self.constraints = {
                label: compile_constraint(label, self.profile, self.schema)
                for label in LABELS
                if label in self.profile.supplied_labels()
            }

    @property
    def supplied(self) -> frozenset[str]:
        return frozenset(self.constraints)


def _prefixes_used() -> dict[str, str]:
    return {k: vocab.PREFIXES[k] for k in ("rdf", "uvso", "uvo", "uvoo", "upo", "gr")}


def compile_profile(task: RecommendationTask, active: Iterable[str] | None = None) -> Query:
    """The constraint query realizing ``active`` (default: every supplied label)."""
    active_set = task.supplied if active is None else frozenset(active)
    for label in active_set:
        if label not in LABELS:
            raise UnknownLabel(f"unknown constraint label {label!r}")
        if label not in task.constraints:
            raise MissingPreference(label, task.profile.user_id)
    item = Variable(ITEM_VAR)
    bgp = [TriplePattern(item, vocab.RDF_TYPE, task.schema.item_class)]
    filters: list[FilterExpr] = []
    for label in _QUERY_ORDER:
        if label not in active_set:
            continue
        c = task.constraints[label]
        for p in c.patterns:
            if p not in bgp:
                bgp.append(p)
        if c.filter is not None:
            filters.append(c.filter)
    return Query([ITEM_VAR], bgp, filters, distinct=True, prefixes=_prefixes_used())


def matching_items(task: RecommendationTask, active: Iterable[str] | None = None) -> list[Iri]:
    """Every item satisfying ``active``, in term order."""
    query = compile_profile(task, active)
    rows = execute(task.graph, query, task.diagnostics)
    return [row[ITEM_VAR] for row in rows]


def solution_count(task: RecommendationTask, active: Iterable[str] | None = None) -> int:
    key = task.supplied if active is None else frozenset(active)
    cached = task._counts.get(key)
    if cached is None:
        cached = len(matching_items(task, key))
        task._counts[key] = cached
    return cached


def recommend(task: RecommendationTask, k: int | None = None, active: Iterable[str] | None = None) -> list[Iri]:
    """Up to ``k`` consistent items; raises Inconsistent when there are none."""
    active_set = task.supplied if active is None else frozenset(active)
    items = matching_items(task, active_set)
    task._counts.setdefault(active_set, len(items))
    if not items:
        raise Inconsistent(task, active_set)
    return items if k is None else items[:k]


def recommendation_record(task: RecommendationTask, items: Sequence[Iri], count: int) -> dict[str, Any]:
    return {"user_id": task.profile.user_id, "items": [i.value for i in items], "count": count}
