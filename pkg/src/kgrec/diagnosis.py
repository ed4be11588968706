"""Relaxing inconsistent preference sets, and the cohort relaxation experiment."""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .recommender import LABELS, RecommendationTask, UnknownLabel, solution_count

# Named relaxation sets used by the cohort experiment; "full" removes nothing.
DEFAULT_DELTA_SETS: dict[str, tuple[str, ...]] = {
    "full": (),
    "D1": ("Seats",),
    "D2": ("VehicleType",),
    "D3": ("Brand",),
    "D4": ("Color",),
    "D5": ("Mileage",),
    "D6": ("Price",),
    "D7": ("Color", "Brand"),
}


class NoDiagnosis(Exception):
    pass


class AlreadyConsistent(ValueError):
    pass


@dataclass(frozen=True)
class Diagnosis:
    removed: frozenset[str]

    def labels(self) -> list[str]:
        return [label for label in LABELS if label in self.removed]

    def __str__(self) -> str:
        return "{" + ", ".join(self.labels()) + "}"


def _check_labels(labels: Iterable[str], supplied: frozenset[str]) -> frozenset[str]:
    labels = frozenset(labels)
    for label in labels:
        if label not in LABELS:
            raise UnknownLabel(f"unknown constraint label {label!r}")
        if label not in supplied:
            raise UnknownLabel(f"label {label} is not among the profile's constraints {sorted(supplied)}")
    return labels


def apply_diagnosis(task: RecommendationTask, delta: Iterable[str] | Diagnosis) -> frozenset[str]:
    removed = delta.removed if isinstance(delta, Diagnosis) else delta
    return task.supplied - _check_labels(removed, task.supplied)


def is_consistent(task: RecommendationTask, delta: Iterable[str] = ()) -> bool:
    return solution_count(task, apply_diagnosis(task, delta)) > 0


def preferred_diagnosis(task: RecommendationTask) -> Diagnosis:
    """Drop constraints from the least preferred upward until something matches."""
    if is_consistent(task):
        raise AlreadyConsistent(f"user {task.profile.user_id} already has solutions")
    removed: list[str] = []
    for label in reversed(task.profile.preference_order()):
        removed.append(label)
        if is_consistent(task, removed):
            return Diagnosis(frozenset(removed))
    raise NoDiagnosis(f"no item matches user {task.profile.user_id} even with every constraint removed")


def enumerate_minimal_diagnoses(task: RecommendationTask, max_size: int | None = None) -> list[Diagnosis]:
    """All subset-minimal relaxations of size <= max_size, smallest first.

    Relaxing more never removes solutions, so a set is minimal exactly when
    it is consistent and contains no smaller diagnosis already found.
    """
    supplied = [label for label in LABELS if label in task.supplied]
    if len(supplied) > 6:
        raise ValueError("subset enumeration is limited to 6 constraints")
    limit = len(supplied) if max_size is None else min(max_size, len(supplied))
    found: list[frozenset[str]] = []
    for size in range(limit + 1):
        for combo in combinations(supplied, size):
            delta = frozenset(combo)
            if any(f <= delta for f in found):
                continue
            if is_consistent(task, delta):
                found.append(delta)
    return [Diagnosis(d) for d in found]


# -- cohort experiment ----------------------------------------------------------------


@dataclass(frozen=True)
class Bucket:
    low: int
    high: int | None  # inclusive; None means unbounded

    @property
    def label(self) -> str:
        if self.high is None:
            return f">{self.low - 1}"
        if self.low == self.high:
            return str(self.low)
        return f"{self.low}-{self.high}"

    def __contains__(self, n: int) -> bool:
        return n >= self.low and (self.high is None or n <= self.high)


DEFAULT_BUCKETS = "0,1-5,6-10,>10"


def parse_buckets(spec: str) -> list[Bucket]:
    """Parse e.g. ``"0,1-5,6-10,>10"``. Buckets must tile [0, inf) in order."""
    buckets: list[Bucket] = []
    for part in (p.strip() for p in spec.split(",")):
        if m := re.fullmatch(r"(\d+)", part):
            buckets.append(Bucket(int(m[1]), int(m[1])))
        elif m := re.fullmatch(r"(\d+)-(\d+)", part):
            buckets.append(Bucket(int(m[1]), int(m[2])))
        elif m := re.fullmatch(r">(\d+)", part):
            buckets.append(Bucket(int(m[1]) + 1, None))
        elif m := re.fullmatch(r"(\d+)\+", part):
            buckets.append(Bucket(int(m[1]), None))
        else:
            raise ValueError(f"bad bucket {part!r}")
    expected = 0
    for b in buckets:
        if expected is None or b.low != expected or (b.high is not None and b.high < b.low):
            raise ValueError(f"buckets must be contiguous from 0: {spec!r}")
        expected = None if b.high is None else b.high + 1
    if expected is not None:
        raise ValueError(f"last bucket must be open-ended: {spec!r}")
    return buckets


def parse_delta_sets(spec: str) -> dict[str, tuple[str, ...]]:
    """Parse ``"full=;D3=Brand;D7=Color,Brand"`` into named relaxation sets."""
    out: dict[str, tuple[str, ...]] = {}
    for part in (p.strip() for p in spec.split(";")):
        if not part:
            continue
        name, sep, labels = part.partition("=")
        if not sep or not name.strip():
            raise ValueError(f"bad delta set {part!r}; expected name=Label,Label")
        items = tuple(x.strip() for x in labels.split(",") if x.strip())
        for label in items:
            if label not in LABELS:
                raise UnknownLabel(f"unknown constraint label {label!r}")
        out[name.strip()] = items
    return out


@dataclass
class CohortRow:
    name: str
    removed: tuple[str, ...]
    counts: list[int]
    per_user: dict[str, int]

    @property
    def consistency_rate(self) -> float:
        if not self.per_user:
            return 0.0
        return sum(1 for n in self.per_user.values() if n > 0) / len(self.per_user)


@dataclass
class CohortReport:
    buckets: list[Bucket]
    rows: list[CohortRow] = field(default_factory=list)

    @property
    def cohort_size(self) -> int:
        return len(self.rows[0].per_user) if self.rows else 0

    def row(self, name: str) -> CohortRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta", "removed", *[b.label for b in self.buckets], "consistency_rate"])
        for r in self.rows:
            w.writerow([r.name, "+".join(r.removed), *r.counts, f"{r.consistency_rate:.4f}"])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "cohort_size": self.cohort_size,
            "buckets": [b.label for b in self.buckets],
            "rows": [
                {
                    "delta": r.name,
                    "removed": list(r.removed),
                    "histogram": dict(zip((b.label for b in self.buckets), r.counts)),
                    "consistency_rate": round(r.consistency_rate, 6),
                    "per_user": r.per_user,
                }
                for r in self.rows
            ],
        }
        return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"


def run_cohort_experiment(
    cohort: Sequence[RecommendationTask],
    delta_sets: Mapping[str, Sequence[str]] | None = None,
    buckets: Sequence[Bucket] | str = DEFAULT_BUCKETS,
) -> CohortReport:
    """Bucket every user's solution count under each relaxation set.

    A relaxation set only removes the labels a user actually supplied.
    """
    if isinstance(buckets, str):
        buckets = parse_buckets(buckets)
    delta_sets = DEFAULT_DELTA_SETS if delta_sets is None else delta_sets
    report = CohortReport(list(buckets))
    for name, removed in delta_sets.items():
        for label in removed:
            if label not in LABELS:
                raise UnknownLabel(f"unknown constraint label {label!r}")
        counts = [0] * len(buckets)
        per_user: dict[str, int] = {}
        for task in cohort:
            delta = frozenset(removed) & task.supplied
            n = solution_count(task, apply_diagnosis(task, delta))
            per_user[task.profile.user_id] = n
            for i, b in enumerate(buckets):
                if n in b:
                    counts[i] += 1
                    break
        report.rows.append(CohortRow(name, tuple(removed), counts, per_user))
    return report
