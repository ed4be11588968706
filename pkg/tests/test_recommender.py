from __future__ import annotations

import datetime as dt
import random
from importlib.resources import files

import pytest

from kgrec import vocab
from kgrec.dataset import GeneratorConfig, generate
from kgrec.query import Compare, format_filter, parse_query
from kgrec.recommender import (
    DEFAULT_SCHEMA,
    ITEM_VARIABLES,
    LABELS,
    Inconsistent,
    MissingPreference,
    RecommendationTask,
    UnknownLabel,
    UserProfile,
    compile_constraint,
    compile_profile,
    dump_profiles,
    load_profiles,
    matching_items,
    recommend,
    recommendation_record,
    solution_count,
)
from kgrec.rules import parse_rules, saturate
from kgrec.store import Graph, TriplePattern
from kgrec.terms import Literal, Variable

from builders import BERLINE, car, catalog, preference_triples, vehicle, worked_catalog, worked_profile
from oracles import item_passes, oracle_items, recheck

NOW = dt.date(2023, 6, 1)


def bundled_rules():
    return parse_rules(files("kgrec").joinpath("data/vehicle_rules.swrl").read_text(encoding="utf-8"))


def small_cohort(seed: int, n_vehicles: int = 80, n_users: int = 40, **cfg):
    data = generate(seed, n_vehicles, n_users, GeneratorConfig(**cfg))
    graph = saturate(data.graph, bundled_rules(), NOW)
    return graph, [RecommendationTask(p, graph) for p in data.profiles]


# -- schema and profiles ------------------------------------------------------------------


def test_schema_covers_every_item_variable():
    for name in ITEM_VARIABLES:
        path = DEFAULT_SCHEMA.path(name)
        assert all(p in vocab.PROPERTIES for p in path.properties)


def test_profile_rejects_non_positive_numbers():
    with pytest.raises(ValueError):
        UserProfile("u", seats=0)
    with pytest.raises(ValueError):
        UserProfile("u", max_budget=-5)


def test_rank_must_permute_supplied_labels():
    UserProfile("u", seats=5, brand="audi", rank=("Brand", "Seats"))
    with pytest.raises(ValueError):
        UserProfile("u", seats=5, brand="audi", rank=("Brand",))
    with pytest.raises(ValueError):
        UserProfile("u", seats=5, rank=("Seats", "Price"))


def test_profile_json_round_trip():
    profiles = [worked_profile(rank=("Price", "Brand", "Seats", "Color", "Mileage", "VehicleType"))]
    assert load_profiles(dump_profiles(profiles)) == profiles


def test_profiles_load_from_json_array():
    (p,) = load_profiles('[{"user_id": "u1", "couleur": "noire", "maxBudget": 9000}]')
    assert p.colors == ("noire",) and p.supplied_labels() == {"Color", "Price"}


def test_duplicate_user_ids_rejected():
    with pytest.raises(ValueError):
        load_profiles('{"user_id": "u1"}\n{"user_id": "u1"}\n')


# -- compile_constraint -------------------------------------------------------------------


def test_price_with_floor():
    c = compile_constraint("Price", UserProfile("u", max_budget=100_000, min_budget=20_000))
    assert format_filter(c.filter) == "?prix <= 100000 && ?prix >= 20000"


def test_price_without_floor_is_upper_bound_only():
    c = compile_constraint("Price", UserProfile("u", max_budget=100_000))
    assert c.filter == Compare("<=", Variable("prix"), Literal(100_000, "integer"))


def test_mileage_is_strict():
    c = compile_constraint("Mileage", UserProfile("u", max_mileage=100_000))
    assert c.filter.op == "<"


def test_colors_become_disjunction_of_stems():
    c = compile_constraint("Color", UserProfile("u", colors=("blanche", "bleue")))
    assert format_filter(c.filter) == 'contains(?couleur, "blanc") || contains(?couleur, "bleu")'


def test_seats_is_exact_integer():
    c = compile_constraint("Seats", UserProfile("u", seats=5))
    assert c.filter is None
    assert c.patterns[-1].object == Literal(5, "integer")


def test_brand_is_contains_on_str():
    c = compile_constraint("Brand", UserProfile("u", brand="Audi"))
    assert format_filter(c.filter) == 'contains(str(?marque), "audi")'


def test_vehicle_type_is_exact_pattern():
    c = compile_constraint("VehicleType", UserProfile("u", vehicle_type="suv"))
    assert c.patterns == (TriplePattern(Variable("auto"), vocab.STYLE_VEHICULE, vocab.VEHICLE_TYPES["suv"]),)


def test_missing_preference():
    with pytest.raises(MissingPreference):
        compile_constraint("Brand", UserProfile("u", seats=5))
    with pytest.raises(UnknownLabel):
        compile_constraint("Speed", UserProfile("u", seats=5))


# -- compile_profile --------------------------------------------------------------------


def test_no_active_labels_matches_whole_catalog():
    g = worked_catalog()
    task = RecommendationTask(worked_profile(), g)
    assert solution_count(task, set()) == 6


def test_full_profile_is_structurally_the_worked_query():
    """Same patterns and filters, except the mileage bound is strict."""
    worked = parse_query(files("kgrec").joinpath("data/constraint_query_example.rq").read_text(encoding="utf-8"))
    task = RecommendationTask(worked_profile(), worked_catalog())
    compiled = compile_profile(task)
    assert set(compiled.bgp) == set(worked.bgp)
    expected = [format_filter(f).replace("?valeurKilometrage <= ", "?valeurKilometrage < ") for f in worked.filters]
    assert sorted(map(format_filter, compiled.filters)) == sorted(expected)
    assert matching_items(task) == [car("conforme")]


def test_active_subset_must_be_supplied():
    task = RecommendationTask(UserProfile("u", seats=5), worked_catalog())
    with pytest.raises(MissingPreference):
        compile_profile(task, {"Brand"})


def test_adding_a_label_never_increases_count():
    rng = random.Random(2)
    _, tasks = small_cohort(41, 80, 100)
    assert len(tasks) == 100
    for task in tasks:
        labels = sorted(task.supplied)
        rng.shuffle(labels)
        counts = [solution_count(task, labels[:k]) for k in range(len(labels) + 1)]
        assert counts == sorted(counts, reverse=True)


# -- recommend ---------------------------------------------------------------------------


def test_single_conforming_vehicle():
    g = catalog(vehicle("seule", style=BERLINE, price=30_000, mileage=10_000))
    task = RecommendationTask(worked_profile(), g)
    assert recommend(task, 5) == [car("seule")]


def test_everything_too_expensive_is_inconsistent():
    g = catalog(vehicle("a", price=120_000), vehicle("b", price=101_000))
    task = RecommendationTask(UserProfile("u", max_budget=100_000), g)
    with pytest.raises(Inconsistent) as err:
        recommend(task)
    assert err.value.active == {"Price"}


def test_k_limits_and_order_is_deterministic():
    g = catalog(*(vehicle(f"v{i}", price=1000 * i) for i in range(1, 6)))
    task = RecommendationTask(UserProfile("u", max_budget=100_000), g)
    assert recommend(task, 2) == [car("v1"), car("v2")]
    assert recommendation_record(task, recommend(task, 2), solution_count(task)) == {
        "user_id": "u", "items": [car("v1").value, car("v2").value], "count": 5,
    }


def test_recommendations_pass_per_constraint_recheck():
    checked = 0
    for seed in (5, 6, 7):
        _, tasks = small_cohort(seed, 60, 34, drift=0.15)
        for task in tasks:
            try:
                items = recommend(task)
            except Inconsistent:
                continue
            for item in items:
                for label in task.supplied:
                    assert recheck(task, item, label)
                    assert item_passes(task.graph, item, label, task.profile)
            checked += 1
    assert checked >= 60


def test_counts_equal_per_item_scan():
    graph, tasks = small_cohort(9, 70, 30, drift=0.2)
    for task in tasks:
        assert matching_items(task) == oracle_items(graph, task.profile, task.supplied)
        for label in task.supplied:
            assert solution_count(task, {label}) == len(oracle_items(graph, task.profile, {label}))


def test_empty_catalog_counts_zero():
    task = RecommendationTask(UserProfile("u", seats=5), Graph())
    assert solution_count(task) == 0
    assert solution_count(task, set()) == 0


def test_derived_types_widen_vehicle_type():
    prefs = preference_triples("upo:pref_u", route="longDistance")
    cars = catalog(
        vehicle("berline", style=vocab.VEHICLE_TYPES["sedan"]),
        vehicle("suv", style=vocab.VEHICLE_TYPES["suv"]),
        vehicle("crossover", style=vocab.VEHICLE_TYPES["crossover"]),
    ).union(prefs)
    profile = UserProfile("u", vehicle_type="suv", preference_node="upo:pref_u")
    before = matching_items(RecommendationTask(profile, cars))
    after = matching_items(RecommendationTask(profile, saturate(cars, bundled_rules(), NOW)))
    assert before == [car("suv")]
    assert after == [car("crossover"), car("suv")]


def test_saturation_never_removes_recommendations():
    data = generate(13, 60, 30)
    sat = saturate(data.graph, bundled_rules(), NOW)
    for p in data.profiles:
        plain = set(matching_items(RecommendationTask(p, data.graph)))
        assert plain <= set(matching_items(RecommendationTask(p, sat)))


def test_labels_are_fixed():
    assert LABELS == ("Seats", "VehicleType", "Brand", "Color", "Mileage", "Price")
