from __future__ import annotations

import json
from importlib.resources import files

import pytest

from kgrec import vocab
from kgrec.cli import (
    EXIT_ERROR,
    EXIT_INCONSISTENT,
    EXIT_NO_DIAGNOSIS,
    EXIT_NON_TERMINATION,
    EXIT_OK,
    EXIT_PARSE,
    main,
)
from kgrec.ntriples import serialize_ntriples
from kgrec.recommender import UserProfile, dump_profiles

from builders import catalog, preference_triples, vehicle

NOW = ["--now", "2023-06-01"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def ws(tmp_path):
    return tmp_path


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture
def small_world(ws):
    """A three-car catalog, one long-distance preference node and two profiles."""
    g = catalog(
        vehicle("berline", price=20_000),
        vehicle("suv", style=vocab.VEHICLE_TYPES["suv"], price=30_000),
        vehicle("crossover", style=vocab.VEHICLE_TYPES["crossover"], price=25_000),
    ).union(preference_triples("upo:pref_u1", route="longDistance"))
    profiles = [
        UserProfile("u1", vehicle_type="suv", max_budget=26_000, preference_node="upo:pref_u1"),
        UserProfile("u2", max_budget=5_000, seats=5, rank=("Seats", "Price")),
    ]
    return {
        "graph": write(ws / "g.nt", serialize_ntriples(g)),
        "profiles": write(ws / "p.jsonl", dump_profiles(profiles)),
        "workspace": str(ws / "state"),
    }


def test_load_empty_file(capsys, ws):
    code, out, _ = run(capsys, "load", "--graph", write(ws / "e.nt", ""), "--workspace", str(ws / "s"))
    assert code == EXIT_OK
    assert json.loads(out)["triples"] == 0


def test_load_then_dump_is_canonical(capsys, ws, small_world):
    text = (ws / "g.nt").read_text(encoding="utf-8")
    shuffled = "\n".join(reversed(text.splitlines())) + "\n"
    src = write(ws / "shuffled.nt", "# shuffled copy\n" + shuffled)
    assert run(capsys, "load", "--graph", src, "--workspace", small_world["workspace"])[0] == EXIT_OK
    code, out, _ = run(capsys, "dump", "--workspace", small_world["workspace"])
    assert code == EXIT_OK and out == text


def test_load_generated_catalog(capsys, ws):
    data = ws / "data"
    assert run(capsys, "generate", "--seed", "5", "--vehicles", "500", "--users", "50", "--out", str(data))[0] == 0
    code, out, _ = run(capsys, "load", "--graph", str(data / "vehicles.nt"), "--graph", str(data / "profiles.nt"),
                       "--workspace", str(ws / "s"))
    assert code == EXIT_OK
    assert json.loads(out)["automobiles"] == 500


def test_parse_error_exit_code_and_location(capsys, ws):
    bad = write(ws / "bad.nt", "<u:a> <u:p> <u:b> .\n<u:a> <u:p> .\n")
    code, _, err = run(capsys, "load", "--graph", bad, "--workspace", str(ws / "s"))
    assert code == EXIT_PARSE
    assert "bad.nt:2" in err


def test_infer_without_rules_derives_nothing(capsys, ws, small_world):
    empty = write(ws / "none.swrl", "# no rules\n")
    code, out, _ = run(capsys, "infer", "--graph", small_world["graph"], "--rules", empty, *NOW)
    assert code == EXIT_OK and json.loads(out)["derived"] == 0


def test_infer_reports_preferred_types_and_reaches_fixpoint(capsys, small_world):
    wsd = small_world["workspace"]
    run(capsys, "load", "--graph", small_world["graph"], "--workspace", wsd)
    code, out, _ = run(capsys, "infer", "--workspace", wsd, "--rules", "bundled", *NOW)
    report = json.loads(out)
    assert code == EXIT_OK
    pref = f"<{vocab.UPO}pref_u1> <{vocab.A_UN_TYPE_DE_VEHICULE_PREFERE.value}>"
    assert f"{pref} <{vocab.UPO}SUV> ." in report["triples"]
    assert f"{pref} <{vocab.UPO}Crossover> ." in report["triples"]
    saturated = f"{wsd}/saturated.nt"
    code, out, _ = run(capsys, "infer", "--graph", saturated, "--rules", "bundled", *NOW)
    assert json.loads(out)["derived"] == 0


def test_infer_ntriples_output(capsys, small_world):
    code, out, _ = run(capsys, "infer", "--graph", small_world["graph"], "--rules", "bundled", *NOW,
                       "--format", "ntriples")
    assert code == EXIT_OK and len(out.splitlines()) == 2


def test_recommend_satisfiable_user(capsys, small_world):
    code, out, _ = run(capsys, "recommend", "u1", "--graph", small_world["graph"], "--profiles",
                       small_world["profiles"], "--rules", "bundled", *NOW)
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["user_id"] == "u1" and doc["items"] == [vocab.UVSO + "crossover"] and doc["count"] == 1


def test_recommend_inconsistent_user(capsys, small_world):
    code, _, err = run(capsys, "recommend", "u2", "--graph", small_world["graph"], "--profiles",
                       small_world["profiles"])
    assert code == EXIT_INCONSISTENT and "u2" in err


def test_unknown_user(capsys, small_world):
    code, _, err = run(capsys, "recommend", "nobody", "--graph", small_world["graph"], "--profiles",
                       small_world["profiles"])
    assert code == EXIT_ERROR and "nobody" in err


def test_diagnose_consistent_user_is_empty(capsys, small_world):
    code, out, _ = run(capsys, "diagnose", "u1", "--graph", small_world["graph"], "--profiles",
                       small_world["profiles"], "--rules", "bundled", *NOW)
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["consistent"] is True and doc["preferred"] == [] and doc["minimal"] == []


def test_diagnose_inconsistent_user(capsys, small_world):
    code, out, _ = run(capsys, "diagnose", "u2", "--graph", small_world["graph"], "--profiles",
                       small_world["profiles"])
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["preferred"] == ["Price"] and doc["minimal"] == [["Price"]] and doc["relaxed_count"] == 3


def test_diagnose_empty_catalog_has_no_diagnosis(capsys, ws, small_world):
    empty = write(ws / "empty.nt", "")
    code, _, _ = run(capsys, "diagnose", "u2", "--graph", empty, "--profiles", small_world["profiles"])
    assert code == EXIT_NO_DIAGNOSIS


def test_non_termination_exit_code(capsys, ws):
    g = write(ws / "g.nt", f"<{vocab.UPO}a> <{vocab.RDF_TYPE.value}> <http://example.org/ns#P> .\n")
    rules = write(ws / "chain.swrl", "r1: P(?x) -> Q(?x) .\nr2: Q(?x) -> S(?x) .\n")
    code, _, err = run(capsys, "infer", "--graph", g, "--rules", rules, "--max-rounds", "1")
    assert code == EXIT_NON_TERMINATION and "1 rounds" in err


def test_rule_syntax_error_exit_code(capsys, ws, small_world):
    rules = write(ws / "bad.swrl", "r1: P(?x) Q(?x) .\n")
    code, _, _ = run(capsys, "infer", "--graph", small_world["graph"], "--rules", rules)
    assert code == EXIT_PARSE


def test_query_command(capsys, small_world):
    q = files("kgrec").joinpath("data/constraint_query_example.rq")
    code, out, _ = run(capsys, "query", str(q), "--graph", small_world["graph"], "--format", "csv")
    assert code == EXIT_OK and out == "auto\n"
    code, out, _ = run(capsys, "query", str(q), "--graph", small_world["graph"])
    assert json.loads(out) == []


def test_query_syntax_error(capsys, ws, small_world):
    q = write(ws / "q.rq", "SELECT ?x WHERE { ?x }")
    assert run(capsys, "query", q, "--graph", small_world["graph"])[0] == EXIT_PARSE


def test_bad_date_is_rejected(capsys, small_world):
    with pytest.raises(SystemExit) as err:
        main(["infer", "--graph", small_world["graph"], "--rules", "bundled", "--now", "2023-02-30"])
    assert err.value.code == 2


def test_missing_snapshot(capsys, ws):
    code, _, err = run(capsys, "infer", "--workspace", str(ws / "nothing"), "--rules", "bundled", *NOW)
    assert code == EXIT_ERROR and "snapshot" in err


def test_experiment_from_files_is_deterministic(capsys, ws, small_world):
    out_a, out_b = ws / "a.csv", ws / "b.csv"
    for out in (out_a, out_b):
        code, _, _ = run(capsys, "experiment", "--graph", small_world["graph"], "--profiles",
                         small_world["profiles"], "--rules", "bundled", *NOW, "--out", str(out))
        assert code == EXIT_OK
    assert out_a.read_bytes() == out_b.read_bytes()
    lines = out_a.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "delta,removed,0,1-5,6-10,>10,consistency_rate"
    assert lines[1] == "full,,1,1,0,0,0.5000"


def test_experiment_custom_sets_and_json(capsys):
    code, out, _ = run(capsys, "experiment", "--vehicles", "40", "--users", "10", "--seed", "3",
                       "--delta-sets", "full=;both=Color,Brand", "--buckets", "0,1-3,>3", "--format", "json")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert [r["delta"] for r in doc["rows"]] == ["full", "both"]
    assert doc["buckets"] == ["0", "1-3", ">3"]


def test_experiment_bad_label(capsys):
    code, _, err = run(capsys, "experiment", "--vehicles", "5", "--users", "1", "--delta-sets", "x=Speed")
    assert code == EXIT_ERROR and "Speed" in err


def test_generate_is_deterministic(capsys, ws):
    for name in ("a", "b"):
        run(capsys, "generate", "--seed", "9", "--vehicles", "30", "--users", "5", "--out", str(ws / name))
    for f in ("vehicles.nt", "profiles.nt", "profiles.jsonl", "interactions.jsonl"):
        assert (ws / "a" / f).read_bytes() == (ws / "b" / f).read_bytes()


def test_output_does_not_depend_on_working_graph_order(capsys, ws, small_world):
    text = (ws / "g.nt").read_text(encoding="utf-8")
    rev = write(ws / "rev.nt", "".join(reversed(text.splitlines(keepends=True))))
    outs = []
    for g in (small_world["graph"], rev):
        outs.append(run(capsys, "infer", "--graph", g, "--rules", "bundled", *NOW)[1])
    assert outs[0] == outs[1]
