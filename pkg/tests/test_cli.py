import csv
import io
import json

import pytest

from himm import gen_recursive, parse_himm, serialize_himm
from himm.cli import main


@pytest.fixture
def rec4(tmp_path):
    p = tmp_path / "rec4.json"
    p.write_text(serialize_himm(gen_recursive(4)))
    return p


def _plan_fields(text):
    return dict(line.split(" ", 1) for line in text.splitlines() if " " in line)


def test_gen_and_validate(tmp_path, capsys):
    out = tmp_path / "nested.json"
    assert main(["gen", "nested", "-o", str(out)]) == 0
    assert main(["validate", "--input", str(out)]) == 0
    assert "7 machines" in capsys.readouterr().out


def test_gen_stdout(capsys):
    assert main(["gen", "recursive", "--depth", "3"]) == 0
    assert parse_himm(capsys.readouterr().out) == gen_recursive(3)


def test_gen_random_and_warehouse(tmp_path, capsys):
    r = tmp_path / "r.json"
    assert main(["gen", "random", "--seed", "5", "--depth", "3", "-o", str(r)]) == 0
    assert main(["validate", "--input", str(r)]) == 0
    w = tmp_path / "w.json"
    assert main(["gen", "warehouse", "--houses", "2", "--grid", "2", "--rack", "1", "-o", str(w)]) == 0
    assert "query house1/" in capsys.readouterr().err


def test_validate_reports_all(tmp_path, capsys):
    doc = json.loads(serialize_himm(gen_recursive(2)))
    doc["machines"][0]["transitions"][0]["cost"] = -1
    doc["machines"][1]["start"] = "9"
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    assert main(["validate", "--input", str(p)]) == 1
    out = capsys.readouterr().out
    assert "negative cost" in out and "start not in states" in out


def test_parse_error_exit_code(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text("{ nope")
    assert main(["validate", "--input", str(p)]) == 2
    assert "line 1" in capsys.readouterr().err
    assert main(["validate", "--input", str(tmp_path / "missing.json")]) == 2


def test_plan_modes_agree(rec4, capsys):
    base = ["plan", "--input", str(rec4), "--from", "1/1/1/1", "--to", "3/3/3/3"]
    assert main(base) == 0
    h = _plan_fields(capsys.readouterr().out)
    assert main(base + ["--mode", "flat"]) == 0
    f = _plan_fields(capsys.readouterr().out)
    assert h["feasible"] == f["feasible"] == "true"
    assert h["cost"] == f["cost"] == "8.0"


def test_plan_with_cache_and_emit(rec4, tmp_path, capsys):
    cache, out = tmp_path / "c.json", tmp_path / "plan.txt"
    args = ["plan", "--input", str(rec4), "--from", "1/1/1/1", "--to", "3/3/3/3",
            "--cache", str(cache), "--emit-plan", str(out), "--stats"]
    assert main(args) == 0
    assert cache.exists()
    first = capsys.readouterr().out
    assert "alpha" in first and "online_s" in first
    assert main(args) == 0
    assert "offline_s 0.0" in capsys.readouterr().out
    assert len(out.read_text().split()) == int(_plan_fields(first)["length"])


def test_offline_then_plan(rec4, tmp_path, capsys):
    cache = tmp_path / "c.json"
    assert main(["offline", "--input", str(rec4), "--cache", str(cache)]) == 0
    assert json.loads(cache.read_text())["format"] == "himm-exit-cache"
    capsys.readouterr()
    other = tmp_path / "rec3.json"
    other.write_text(serialize_himm(gen_recursive(3)))
    assert main(["plan", "--input", str(other), "--from", "1/1/1", "--to", "3/3/3",
                 "--cache", str(cache)]) == 2
    assert "does not match" in capsys.readouterr().err


def test_plan_infeasible(tmp_path, capsys):
    doc = {"format": "himm", "version": 1, "inputs": ["x"], "root": "M",
           "machines": [{"id": "M", "states": ["a", "b"], "start": "a",
                         "transitions": [{"from": "a", "input": "x", "to": "b", "cost": 1}]}],
           "refinement": []}
    p = tmp_path / "m.json"
    p.write_text(json.dumps(doc))
    args = ["plan", "--input", str(p), "--from", "b", "--to", "a"]
    assert main(args) == 0
    assert "feasible false" in capsys.readouterr().out
    assert main(args + ["--expect-feasible"]) == 1


def test_plan_unknown_state(rec4, capsys):
    assert main(["plan", "--input", str(rec4), "--from", "1/9", "--to", "3"]) == 2


def test_flat_limit_gate(rec4, capsys):
    args = ["plan", "--input", str(rec4), "--from", "1/1/1/1", "--to", "3/3/3/3",
            "--mode", "flat", "--flat-limit", "10"]
    assert main(args) == 1
    assert "flat-limit" in capsys.readouterr().err


def test_bench_csv(tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert main(["bench", "--depths", "1-6", "--reps", "2", "--csv", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 12
    assert list(rows[0]) == ["instance", "depth", "states", "offline_s", "online_s", "flat_s",
                             "h_cost", "f_cost", "equal"]
    assert all(r["equal"] == "true" for r in rows)
    assert [r["h_cost"] for r in rows[::2]] == ["1.0", "3.0", "5.0", "8.0", "11.0", "15.0"]


def test_bench_gated_rows_blank(capsys):
    assert main(["bench", "--depth", "5", "--flat-limit", "3"]) == 0
    row = next(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert row["flat_s"] == row["f_cost"] == row["equal"] == ""
    assert row["h_cost"] == "11.0"


def test_plan_is_deterministic(rec4, capsys):
    args = ["plan", "--input", str(rec4), "--from", "1/3/1/3", "--to", "3/1/3/1", "--emit-plan", "-"]
    main(args)
    a = capsys.readouterr().out
    main(args)
    assert capsys.readouterr().out == a
