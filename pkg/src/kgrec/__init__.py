"""In-memory RDF store, rule engine and constraint queries for a vehicle recommender."""

from __future__ import annotations

from .diagnosis import Diagnosis, enumerate_minimal_diagnoses, preferred_diagnosis, run_cohort_experiment
from .ntriples import load_ntriples, serialize_ntriples
from .query import execute, parse_query
from .recommender import RecommendationTask, UserProfile, recommend, solution_count
from .rules import parse_rules, run_saturation, saturate
from .store import Graph, Triple, TriplePattern
from .terms import Iri, Literal, Variable

__version__ = "0.1.0"

__all__ = [
    "Diagnosis",
    "Graph",
    "Iri",
    "Literal",
    "RecommendationTask",
    "Triple",
    "TriplePattern",
    "UserProfile",
    "Variable",
    "enumerate_minimal_diagnoses",
    "execute",
    "load_ntriples",
    "parse_query",
    "parse_rules",
    "preferred_diagnosis",
    "recommend",
    "run_cohort_experiment",
    "run_saturation",
    "saturate",
    "serialize_ntriples",
    "solution_count",
]
