"""Command-line pipeline: load -> infer -> query / recommend / diagnose -> experiment.

Every command is a function of its input files and flags. The reference date
for temporal rules comes from ``--now`` and nothing reads the clock.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from importlib.resources import files
from pathlib import Path
from typing import Any, Sequence

from . import dataset, vocab
from .diagnosis import (
    DEFAULT_BUCKETS,
    DEFAULT_DELTA_SETS,
    NoDiagnosis,
    enumerate_minimal_diagnoses,
    is_consistent,
    parse_buckets,
    parse_delta_sets,
    preferred_diagnosis,
    run_cohort_experiment,
)
from .ntriples import NTriplesError, load_ntriples, serialize_ntriples
from .query import QueryDiagnostics, QueryError, execute, parse_query, results_to_csv, results_to_json
from .recommender import (
    Inconsistent,
    RecommendationTask,
    UnknownLabel,
    UserProfile,
    load_profiles,
    recommend,
    recommendation_record,
    solution_count,
)
from .rules import NonTermination, Rule, RuleEvaluationError, RuleSyntaxError, UnsafeRuleError, parse_rules, run_saturation
from .store import Graph

EXIT_OK = 0
EXIT_ERROR = 1  # unknown user, missing inputs, evaluation errors
EXIT_PARSE = 2
EXIT_INCONSISTENT = 3
EXIT_NO_DIAGNOSIS = 4
EXIT_NON_TERMINATION = 5

SNAPSHOT = "snapshot.nt"
SATURATED = "saturated.nt"
BUNDLED_RULES = "bundled"


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_ERROR):
        self.code = code
        super().__init__(message)


# -- inputs ---------------------------------------------------------------------------


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None


def _load_graphs(paths: Sequence[str]) -> Graph:
    graph = Graph()
    for path in paths:
        graph = graph.union(load_ntriples(_read_text(path), source=path))
    return graph


def _workspace_graph(args: argparse.Namespace, prefer_saturated: bool = True) -> Graph:
    if args.graph:
        return _load_graphs(args.graph)
    ws = Path(args.workspace)
    for name in ((SATURATED, SNAPSHOT) if prefer_saturated else (SNAPSHOT,)):
        if (ws / name).exists():
            return _load_graphs([str(ws / name)])
    raise CliError(f"no snapshot in {ws}; run 'kgrec load --graph FILE' or pass --graph")


def _rules(args: argparse.Namespace, required: bool = False) -> list[Rule]:
    if not args.rules:
        if required:
            raise CliError("--rules is required")
        return []
    if args.rules == BUNDLED_RULES:
        text = files("kgrec").joinpath("data/vehicle_rules.swrl").read_text(encoding="utf-8")
        return parse_rules(text)
    return parse_rules(_read_text(args.rules))


def _saturated(args: argparse.Namespace, graph: Graph) -> Graph:
    rules = _rules(args)
    if not rules:
        return graph
    return run_saturation(graph, rules, args.now, args.max_rounds).graph


def _profiles(args: argparse.Namespace) -> list[UserProfile]:
    if not args.profiles:
        raise CliError("--profiles is required")
    return load_profiles(_read_text(args.profiles))


def _task_for(args: argparse.Namespace) -> RecommendationTask:
    graph = _saturated(args, _workspace_graph(args))
    by_id = {p.user_id: p for p in _profiles(args)}
    if args.user not in by_id:
        raise CliError(f"unknown user {args.user!r}")
    return RecommendationTask(by_id[args.user], graph)


# -- output ---------------------------------------------------------------------------


def _dumps(doc: Any) -> str:
    return json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def _emit(args: argparse.Namespace, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)


def _stats_doc(graph: Graph) -> dict[str, Any]:
    doc = dataset.stats(graph).to_dict()
    doc["automobiles"] = dataset.stats(graph).instances(vocab.AUTOMOBILE)
    return doc


# -- commands -------------------------------------------------------------------------


def cmd_load(args: argparse.Namespace) -> int:
    if not args.graph:
        raise CliError("load needs at least one --graph FILE")
    graph = _load_graphs(args.graph)
    ws = Path(args.workspace)
    ws.mkdir(parents=True, exist_ok=True)
    (ws / SNAPSHOT).write_text(serialize_ntriples(graph), encoding="utf-8", newline="")
    # a saturated snapshot of older data would be stale now
    (ws / SATURATED).unlink(missing_ok=True)
    _emit(args, _dumps(_stats_doc(graph)))
    return EXIT_OK


def cmd_dump(args: argparse.Namespace) -> int:
    if args.graph:
        graph = _load_graphs(args.graph)
    else:
        ws = Path(args.workspace)
        path = ws / (SATURATED if args.saturated else SNAPSHOT)
        if not path.exists():
            raise CliError(f"{path} does not exist")
        graph = _load_graphs([str(path)])
    _emit(args, serialize_ntriples(graph))
    return EXIT_OK


def cmd_infer(args: argparse.Namespace) -> int:
    graph = _workspace_graph(args, prefer_saturated=False)
    result = run_saturation(graph, _rules(args, required=True), args.now, args.max_rounds)
    if not args.graph:
        ws = Path(args.workspace)
        (ws / SATURATED).write_text(serialize_ntriples(result.graph), encoding="utf-8", newline="")
    derived = Graph(result.derived)
    if args.format == "ntriples":
        _emit(args, serialize_ntriples(derived))
    else:
        _emit(args, _dumps({
            "input_triples": len(graph),
            "derived": len(derived),
            "rounds": result.rounds,
            "triples": [t.n3() for t in derived.sorted_triples()],
        }))
    return EXIT_OK


def cmd_query(args: argparse.Namespace) -> int:
    graph = _saturated(args, _workspace_graph(args))
    query = parse_query(_read_text(args.query_file))
    if args.limit is not None:
        query.limit = args.limit
    diagnostics = QueryDiagnostics()
    rows = execute(graph, query, diagnostics)
    if diagnostics.filter_errors:
        print(f"warning: {diagnostics.filter_errors} solutions dropped by filter errors", file=sys.stderr)
    _emit(args, results_to_csv(rows, query.select_vars) if args.format == "csv"
          else results_to_json(rows, query.select_vars))
    return EXIT_OK


def cmd_recommend(args: argparse.Namespace) -> int:
    task = _task_for(args)
    items = recommend(task, args.limit)
    _emit(args, _dumps(recommendation_record(task, items, solution_count(task))))
    return EXIT_OK


def cmd_diagnose(args: argparse.Namespace) -> int:
    task = _task_for(args)
    doc: dict[str, Any] = {
        "user_id": task.profile.user_id,
        "constraints": [label for label in task.profile.preference_order()],
        "count": solution_count(task),
    }
    if is_consistent(task):
        doc.update(consistent=True, preferred=[], minimal=[])
        _emit(args, _dumps(doc))
        return EXIT_OK
    minimal = enumerate_minimal_diagnoses(task)
    preferred = preferred_diagnosis(task)
    doc.update(
        consistent=False,
        preferred=preferred.labels(),
        relaxed_count=solution_count(task, task.supplied - preferred.removed),
        minimal=[d.labels() for d in minimal],
    )
    _emit(args, _dumps(doc))
    return EXIT_OK


def cohort_tasks(args: argparse.Namespace) -> list[RecommendationTask]:
    """The cohort as files, or generated from --seed when no profiles are given."""
    if args.profiles:
        graph = _saturated(args, _workspace_graph(args))
        return [RecommendationTask(p, graph) for p in _profiles(args)]
    cfg = dataset.GeneratorConfig(scarcity=args.scarcity)
    data = dataset.generate(args.seed, args.vehicles, args.users, cfg)
    if args.rules is None:
        args.rules = BUNDLED_RULES
    if args.now is None:
        args.now = cfg.as_of
    graph = _saturated(args, data.graph)
    return [RecommendationTask(p, graph) for p in data.profiles]


def cmd_experiment(args: argparse.Namespace) -> int:
    deltas = parse_delta_sets(args.delta_sets) if args.delta_sets else DEFAULT_DELTA_SETS
    buckets = parse_buckets(args.buckets)
    tasks = cohort_tasks(args)
    report = run_cohort_experiment(tasks, deltas, buckets)
    errors = sum(t.diagnostics.filter_errors for t in tasks)
    if errors:
        print(f"warning: {errors} solutions dropped by filter errors", file=sys.stderr)
    _emit(args, report.to_json() if args.format == "json" else report.to_csv())
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    if not args.out:
        raise CliError("generate needs --out DIR")
    cfg = dataset.GeneratorConfig(scarcity=args.scarcity)
    data = dataset.generate(args.seed, args.vehicles, args.users, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = {
        "vehicles.nt": serialize_ntriples(data.vehicles),
        "profiles.nt": serialize_ntriples(data.profile_graph),
        "profiles.jsonl": "".join(
            json.dumps(p.to_dict(), ensure_ascii=False, sort_keys=True) + "\n" for p in data.profiles
        ),
        "interactions.jsonl": dataset.dump_interactions(data.interactions),
    }
    for name, text in written.items():
        (out / name).write_text(text, encoding="utf-8", newline="")
    sys.stdout.write(_dumps({
        "seed": args.seed,
        "vehicles": args.vehicles,
        "users": args.users,
        "files": sorted(written),
        "triples": len(data.graph),
    }))
    return EXIT_OK


# -- argument parsing -----------------------------------------------------------------


def _date(text: str) -> _dt.date:
    try:
        return _dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO date (YYYY-MM-DD): {text!r}") from None


def _non_negative(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workspace", default=".kgrec", help="directory holding snapshot.nt / saturated.nt")
    common.add_argument("--graph", action="append", metavar="FILE", help="N-Triples input (repeatable); bypasses the workspace")
    common.add_argument("--rules", metavar="FILE", help=f"rule file, or '{BUNDLED_RULES}' for the packaged vehicle rules")
    common.add_argument("--profiles", metavar="FILE", help="user profiles as JSON array or JSON Lines")
    common.add_argument("--now", type=_date, metavar="YYYY-MM-DD", help="reference date for temporal builtins")
    common.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    common.add_argument("--max-rounds", type=int, default=100, help="saturation round limit")

    gen = argparse.ArgumentParser(add_help=False)
    gen.add_argument("--seed", type=int, default=dataset.EXPERIMENT_SEED)
    gen.add_argument("--vehicles", type=_non_negative, default=dataset.EXPERIMENT_VEHICLES)
    gen.add_argument("--users", type=_non_negative, default=dataset.EXPERIMENT_USERS)
    gen.add_argument("--scarcity", type=float, default=0.0)

    parser = argparse.ArgumentParser(prog="kgrec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("load", parents=[common], help="parse N-Triples into the workspace snapshot")
    p.set_defaults(func=cmd_load)

    p = sub.add_parser("dump", parents=[common], help="print a snapshot as canonical N-Triples")
    p.add_argument("--saturated", action="store_true", help="dump the saturated snapshot")
    p.set_defaults(func=cmd_dump)

    p = sub.add_parser("infer", parents=[common], help="saturate the snapshot with rules")
    p.add_argument("--format", choices=("json", "ntriples"), default="json")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("query", parents=[common], help="run a SPARQL-subset query")
    p.add_argument("query_file")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--limit", type=_non_negative)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("recommend", parents=[common], help="recommend items for one user")
    p.add_argument("user")
    p.add_argument("--limit", type=_non_negative, help="at most this many items")
    p.add_argument("--format", choices=("json",), default="json")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("diagnose", parents=[common], help="preferred and minimal relaxations for one user")
    p.add_argument("user")
    p.add_argument("--format", choices=("json",), default="json")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("experiment", parents=[common, gen], help="cohort solution-count histograms per relaxation set")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--delta-sets", metavar="SPEC", help="e.g. 'full=;D3=Brand;D7=Color,Brand'")
    p.add_argument("--buckets", default=DEFAULT_BUCKETS, metavar="SPEC")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("generate", parents=[gen], help="write a seeded synthetic dataset")
    p.add_argument("--out", metavar="DIR")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if hasattr(sys.stdout, "reconfigure"):
        sys.stdout.reconfigure(encoding="utf-8")
    try:
        return args.func(args)
    except (NTriplesError, RuleSyntaxError, UnsafeRuleError, QueryError, json.JSONDecodeError) as exc:
        code, msg = EXIT_PARSE, f"parse error: {exc}"
    except Inconsistent as exc:
        code, msg = EXIT_INCONSISTENT, f"inconsistent: {exc}"
    except NoDiagnosis as exc:
        code, msg = EXIT_NO_DIAGNOSIS, f"no diagnosis: {exc}"
    except NonTermination as exc:
        code, msg = EXIT_NON_TERMINATION, f"non-termination: {exc}"
    except (CliError, RuleEvaluationError, UnknownLabel, ValueError) as exc:
        code = exc.code if isinstance(exc, CliError) else EXIT_ERROR
        msg = f"error: {exc}"
    print(f"kgrec: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
