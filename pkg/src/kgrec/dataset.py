"""Seeded synthetic vehicles, user profiles and interactions in the fixed vocabulary.

Vehicles draw every attribute uniformly from the domains in
:class:`GeneratorConfig`. Each user profile is anchored on a random vehicle
(what the user is after usually exists) and each preference field then
drifts to a random value with probability ``drift``, which is what produces
users with no solution. ``scarcity`` restricts that share of vehicles to the
first half of each categorical domain, thinning out the rest.
"""

from __future__ import annotations

import datetime as _dt
import json
import random
from dataclasses import dataclass, field
from typing import Any

from . import vocab
from .ntriples import parse_line
from .recommender import LABELS, UserProfile
from .store import Graph, Triple
from .terms import Iri, Literal

# Generator configuration the cohort experiment is pinned to (see README).
EXPERIMENT_SEED = 20230601
EXPERIMENT_VEHICLES = 500
EXPERIMENT_USERS = 50


@dataclass(frozen=True)
class GeneratorConfig:
    brands: tuple[str, ...] = vocab.BRANDS
    colors: tuple[str, ...] = vocab.COLORS
    vehicle_types: tuple[str, ...] = ("sedan", "suv", "crossover", "van")
    seats: tuple[int, ...] = (2, 4, 5, 7)
    model_years: tuple[int, ...] = vocab.MODEL_YEARS
    price_range: tuple[int, int] = (4_000, 60_000)
    mileage_range: tuple[int, int] = (5_000, 200_000)
    # dates are generated no later than this day
    as_of: _dt.date = _dt.date(2023, 6, 1)
    # share of vehicles whose brand, color and style come from the first half
    # of each domain; preferences drifting into the other half then go unmet
    scarcity: float = 0.0
    # profile side: each field is present with field_presence, and with
    # probability drift it is redrawn instead of copied from the anchor vehicle
    field_presence: float = 0.75
    drift: float = 0.06
    user_vehicle_types: tuple[str, ...] = ("sedan", "suv", "van")
    routes: tuple[str, ...] = tuple(vocab.ROUTE_TYPES)
    profiles: tuple[str, ...] = tuple(vocab.USER_PROFILES)
    max_interactions: int = 3

    def __post_init__(self) -> None:
        if not 0.0 <= self.scarcity < 1.0:
            raise ValueError("scarcity must be in [0, 1)")
        if not 0.0 <= self.drift <= 1.0 or not 0.0 <= self.field_presence <= 1.0:
            raise ValueError("probabilities must be in [0, 1]")


# spellings users write for each color stem
_COLOR_SPELLINGS = {
    "blanc": ("blanc", "blanche"),
    "noir": ("noir", "noire"),
    "bleu": ("bleu", "bleue"),
    "rouge": ("rouge",),
    "gris": ("gris", "grise"),
    "vert": ("vert", "verte"),
}
_FINISHES = ("", " métallisé", " nacré")


@dataclass(frozen=True)
class InteractionRecord:
    user: Iri
    item: Iri
    context: frozenset[Triple]
    kind: str = "favori"

    def to_dict(self) -> dict[str, Any]:
        return {
            "user": self.user.value,
            "item": self.item.value,
            "kind": self.kind,
            "context": [t.n3() for t in sorted(self.context, key=Triple.sort_key)],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "InteractionRecord":
        ctx = frozenset(t for t in (parse_line(x) for x in data.get("context", ())) if t is not None)
        return cls(Iri(data["user"]), Iri(data["item"]), ctx, data.get("kind", "favori"))


@dataclass
class GeneratedData:
    vehicles: Graph
    profile_graph: Graph
    profiles: list[UserProfile]
    interactions: list[InteractionRecord]

    @property
    def graph(self) -> Graph:
        return self.vehicles.union(self.profile_graph)


@dataclass
class _Vehicle:
    iri: Iri
    brand: str
    color: str
    vtype: str
    seats: int
    year: int
    price: int
    mileage: float


def _pick(rng: random.Random, values: tuple, scarce: bool):
    pool = values[: max(1, (len(values) + 1) // 2)] if scarce else values
    return rng.choice(pool)


def _random_date(rng: random.Random, start: _dt.date, end: _dt.date) -> _dt.date:
    span = (end - start).days
    return start + _dt.timedelta(days=rng.randint(0, max(span, 0)))


def _vehicle_triples(v: _Vehicle, idx: int, rng: random.Random, cfg: GeneratorConfig) -> list[Triple]:
    n = f"{idx:05d}"
    places = Iri(f"{vocab.UVSO}places_{n}")
    km = Iri(f"{vocab.UVSO}kilometrage_{n}")
    est = Iri(f"{vocab.UVO}estimation_{n}")
    ct = Iri(f"{vocab.UVSO}controle_{n}")
    produced = _random_date(rng, _dt.date(v.year, 1, 1), min(_dt.date(v.year, 12, 31), cfg.as_of))
    inspected = _random_date(rng, produced, cfg.as_of)
    finish = rng.choice(_FINISHES)
    return [
        Triple(v.iri, vocab.RDF_TYPE, vocab.AUTOMOBILE),
        Triple(v.iri, vocab.NOM, Literal(f"{v.brand.capitalize()} {v.vtype} {n}")),
        Triple(v.iri, vocab.COULEUR, Literal(v.color + finish)),
        Triple(v.iri, vocab.NOMBRE_DE_PLACES, places),
        Triple(places, vocab.A_VALEUR_ENTIER, Literal(v.seats, "integer")),
        Triple(v.iri, vocab.A_FABRICANT, vocab.brand_iri(v.brand)),
        Triple(v.iri, vocab.STYLE_VEHICULE, vocab.VEHICLE_TYPES[v.vtype]),
        Triple(v.iri, vocab.ANNEE_DU_MODELE, Literal(v.year, "integer")),
        Triple(v.iri, vocab.KILOMETRAGE_ODOMETRE, km),
        Triple(km, vocab.A_VALEUR_FLOAT, Literal(v.mileage, "float")),
        Triple(v.iri, vocab.ESTIMATION, est),
        Triple(est, vocab.A_VALEUR_MONETAIRE, Literal(v.price, "integer")),
        Triple(v.iri, vocab.DATE_DE_PRODUCTION, Literal(produced, "date")),
        Triple(v.iri, vocab.INSPECTE, ct),
        Triple(ct, vocab.RDF_TYPE, vocab.CONTROLE_TECHNIQUE),
        Triple(ct, vocab.VALIDE_DE, Literal(inspected, "date")),
    ]


def _make_profile(
    uid: str, anchor: _Vehicle, rng: random.Random, cfg: GeneratorConfig
) -> tuple[UserProfile, str, str]:
    def present() -> bool:
        return rng.random() < cfg.field_presence

    def drifted() -> bool:
        return rng.random() < cfg.drift

    fields: dict[str, Any] = {}
    if present():
        vt = rng.choice(cfg.user_vehicle_types) if drifted() else anchor.vtype
        fields["vehicle_type"] = "suv" if vt == "crossover" else vt
    if present():
        stem = rng.choice(cfg.colors) if drifted() else anchor.color
        colors = [rng.choice(_COLOR_SPELLINGS.get(stem, (stem,)))]
        if rng.random() < 0.3:
            other = rng.choice(cfg.colors)
            if other != stem:
                colors.append(rng.choice(_COLOR_SPELLINGS.get(other, (other,))))
        fields["colors"] = tuple(colors)
    if present():
        fields["seats"] = rng.choice(cfg.seats) if drifted() else anchor.seats
    if present():
        brand = rng.choice(cfg.brands) if drifted() else anchor.brand
        fields["brand"] = brand.capitalize()
    if present():
        base = rng.uniform(*cfg.mileage_range) if drifted() else anchor.mileage
        fields["max_mileage"] = int(base * rng.uniform(1.05, 1.6)) // 1000 * 1000 + 1000
    if present():
        base = rng.uniform(*cfg.price_range) / 3 if drifted() else anchor.price
        fields["max_budget"] = int(base * rng.uniform(1.0, 1.4)) // 500 * 500 + 500
    labels = sorted(
        (label for label, key in (
            ("VehicleType", "vehicle_type"), ("Color", "colors"), ("Seats", "seats"),
            ("Brand", "brand"), ("Mileage", "max_mileage"), ("Price", "max_budget"),
        ) if key in fields),
        key=LABELS.index,
    )
    rng.shuffle(labels)
    route = rng.choice(cfg.routes)
    prof = rng.choice(cfg.profiles)
    profile = UserProfile(
        user_id=uid,
        profile=prof,
        rank=tuple(labels),
        preference_node=f"upo:pref_{uid}",
        **fields,
    )
    return profile, route, prof


def _profile_triples(p: UserProfile, route: str) -> list[Triple]:
    user = Iri(f"{vocab.UPO}user_{p.user_id}")
    pref = Iri(vocab.expand(p.preference_node or f"upo:pref_{p.user_id}"))
    out = [
        Triple(user, vocab.RDF_TYPE, vocab.UTILISATEUR),
        Triple(user, vocab.A_PREFERENCE, pref),
        Triple(pref, vocab.RDF_TYPE, vocab.PREFERENCE_DE_VEHICULE),
        Triple(pref, vocab.A_LE_TYPE_DE_ROUTE_PREFERE, vocab.ROUTE_TYPES[route]),
    ]
    if p.profile:
        out.append(Triple(pref, vocab.A_PROFIL, vocab.USER_PROFILES[p.profile]))
    if p.vehicle_type:
        out.append(Triple(pref, vocab.A_UN_TYPE_DE_VEHICULE_PREFERE, vocab.VEHICLE_TYPES[p.vehicle_type]))
    for c in p.colors:
        out.append(Triple(pref, vocab.A_COULEUR_PREFEREE, Literal(c)))
    if p.seats is not None:
        out.append(Triple(pref, vocab.A_NOMBRE_DE_SIEGES, Literal(p.seats, "integer")))
    if p.max_mileage is not None:
        out.append(Triple(pref, vocab.A_MAX_KILOMETRAGE, Literal(p.max_mileage, "integer")))
    if p.brand:
        out.append(Triple(pref, vocab.A_MARQUE_PREFEREE, vocab.brand_iri(p.brand)))
    if p.max_budget is not None:
        out.append(Triple(pref, vocab.A_MAX_BUDGET, Literal(p.max_budget, "integer")))
    return out


def generate(
    seed: int,
    n_vehicles: int,
    n_users: int,
    config: GeneratorConfig | None = None,
) -> GeneratedData:
    if n_vehicles < 0 or n_users < 0:
        raise ValueError("counts must be non-negative")
    if n_users and not n_vehicles:
        raise ValueError("profiles are anchored on vehicles; n_vehicles must be > 0")
    cfg = config or GeneratorConfig()
    rng = random.Random(seed)

    vehicles: list[_Vehicle] = []
    vtriples: list[Triple] = []
    for i in range(1, n_vehicles + 1):
        scarce = rng.random() < cfg.scarcity
        v = _Vehicle(
            iri=Iri(f"{vocab.UVSO}vehicule_{i:05d}"),
            brand=_pick(rng, cfg.brands, scarce),
            color=_pick(rng, cfg.colors, scarce),
            vtype=_pick(rng, cfg.vehicle_types, scarce),
            seats=rng.choice(cfg.seats),
            year=rng.choice(cfg.model_years),
            price=rng.randint(*cfg.price_range) // 100 * 100,
            mileage=float(rng.randint(*cfg.mileage_range)),
        )
        vehicles.append(v)
        vtriples.extend(_vehicle_triples(v, i, rng, cfg))
    for b in sorted({v.brand for v in vehicles}):
        vtriples.append(Triple(vocab.brand_iri(b), vocab.RDF_TYPE, vocab.FABRICANT))

    profiles: list[UserProfile] = []
    ptriples: list[Triple] = []
    interactions: list[InteractionRecord] = []
    for j in range(1, n_users + 1):
        uid = f"u{j:04d}"
        anchor = rng.choice(vehicles)
        profile, route, _ = _make_profile(uid, anchor, rng, cfg)
        profiles.append(profile)
        ptriples.extend(_profile_triples(profile, route))
        user = Iri(f"{vocab.UPO}user_{uid}")
        for k in range(rng.randint(0, cfg.max_interactions)):
            item = anchor.iri if k == 0 else rng.choice(vehicles).iri
            node = Iri(f"{vocab.UPO}interaction_{uid}_{k}")
            when = _random_date(rng, _dt.date(cfg.as_of.year - 1, 1, 1), cfg.as_of)
            ctx = frozenset({
                Triple(node, Iri(vocab.UPO + "date"), Literal(when, "date")),
                Triple(node, Iri(vocab.UPO + "objectif"), Literal(route)),
            })
            interactions.append(InteractionRecord(user, item, ctx))
    return GeneratedData(Graph(vtriples), Graph(ptriples), profiles, interactions)


def dump_interactions(records: list[InteractionRecord]) -> str:
    return "".join(json.dumps(r.to_dict(), ensure_ascii=False, sort_keys=True) + "\n" for r in records)


# -- stats ----------------------------------------------------------------------------


@dataclass
class GraphStats:
    triples: int = 0
    classes: dict[str, int] = field(default_factory=dict)
    properties: dict[str, dict[str, int]] = field(default_factory=dict)

    def instances(self, cls: Iri) -> int:
        return self.classes.get(cls.value, 0)

    def to_dict(self) -> dict[str, Any]:
        return {"triples": self.triples, "classes": self.classes, "properties": self.properties}


def stats(graph: Graph) -> GraphStats:
    """Triple count, instances per class, and triples / distinct subjects per property."""
    classes: dict[str, int] = {}
    props: dict[str, dict[str, int]] = {}
    pos = graph.index("pos")
    for obj, subjects in pos.get(vocab.RDF_TYPE, {}).items():
        if isinstance(obj, Iri):
            classes[obj.value] = len(subjects)
    for pred in sorted(pos, key=lambda p: p.value):
        by_object = pos[pred]
        subjects = set()
        count = 0
        for subs in by_object.values():
            subjects |= subs
            count += len(subs)
        props[pred.value] = {"triples": count, "subjects": len(subjects)}
    return GraphStats(len(graph), dict(sorted(classes.items())), props)
