from __future__ import annotations

import csv
import json
import math

import pytest

from knotgraph.cli import dumps, main


def write_graph(tmp_path, name, body):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(body))
    return str(path)


@pytest.fixture
def graphs(tmp_path):
    return {
        "tadpole": write_graph(tmp_path, "tadpole", {"regular": {"H": 1, "P": 0, "L": 1, "ell": 1.0}}),
        "tgraph": write_graph(tmp_path, "tgraph", {"regular": {"H": 2, "P": 1, "L": 0, "ell": 1.0}}),
        "star": write_graph(tmp_path, "star", {"regular": {"H": 3, "P": 0, "L": 0, "ell": 1.0}}),
        "fork": write_graph(tmp_path, "fork", {"regular": {"H": 1, "P": 2, "L": 0, "ell": 1.0}}),
        "uneven": write_graph(tmp_path, "uneven", {"general": {"H": 1, "pendants": [1.0, 2.0]}}),
    }


def run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_classify(capsys):
    code, out, _ = run(capsys, ["classify", "--p", "4", "--theta", "0", "--ell", "2.0"])
    doc = json.loads(out)
    assert code == 0
    assert doc["description"] == "no monotone solutions; constant solution exists"
    assert doc["thresholds"]["ell_star_1"] == pytest.approx(math.pi / math.sqrt(2))
    code, out, _ = run(capsys, ["classify", "--p", "4", "--theta", "-1", "--ell", "1"])
    doc = json.loads(out)
    assert code == 0 and doc["computed_roots"] == {}
    code, out, _ = run(capsys, ["classify", "--p", "4", "--theta", "10", "--ell", "0.47"])
    doc = json.loads(out)
    assert doc["computed_roots"]["increasing"]["multiplicity_flag"]


def test_solve_writes_files(capsys, graphs, tmp_path):
    out_dir = tmp_path / "solve"
    code, out, _ = run(capsys, ["solve", "--graph", graphs["tadpole"], "--split", "1,0",
                                "--output-dir", str(out_dir)])
    assert code == 0
    doc = json.loads((out_dir / "summary.json").read_text())
    assert doc["selected"]["diagnostics"]["valid"] and doc["selected"]["action"] > 0
    for edge in doc["edges"]:
        with open(out_dir / f"edge_{edge}.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x", "u", "uprime"] and len(rows) > 200


def test_solve_no_solution(capsys, graphs):
    code, _, err = run(capsys, ["solve", "--graph", graphs["tadpole"], "--split", "0,1", "--ell", "0.3"])
    assert code == 3
    assert "0.549306" in err


def test_solve_constant_core(capsys, graphs, tmp_path):
    code, out, _ = run(capsys, ["solve", "--graph", graphs["tgraph"], "--split", "1,1",
                                "--output-dir", str(tmp_path / "c")])
    doc = json.loads(out)
    assert code == 0 and doc["selected"]["kind"] == "constant-core"
    with open(tmp_path / "c" / "edge_pendant_0.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert all(float(r["u"]) == 1.0 for r in rows)


def test_rank_and_topology_errors(capsys, graphs):
    code, out, _ = run(capsys, ["rank", "--graph", graphs["tadpole"]])
    doc = json.loads(out)
    assert code == 0
    top = doc["candidates"][0]
    assert top["kind"] == "increasing" and top["theta"] == 0.5
    assert run(capsys, ["rank", "--graph", graphs["star"]])[0] == 4
    assert run(capsys, ["rank", "--graph", graphs["uneven"]])[0] == 4


def test_rank_small_ell_flagged(capsys, graphs):
    code, out, _ = run(capsys, ["rank", "--graph", graphs["tgraph"], "--ell", "0.05"])
    doc = json.loads(out)
    assert doc["candidates"][0]["open_flag"]
    assert all(c["diagnostics"]["min_value"] > 0 for c in doc["candidates"])


def test_config_errors(capsys, graphs, tmp_path):
    assert run(capsys, ["classify", "--p", "11", "--theta", "0", "--ell", "1"])[0] == 1
    assert run(capsys, ["rank", "--graph", str(tmp_path / "missing.json")])[0] == 1
    bad = write_graph(tmp_path, "bad", {"regular": {"H": 1, "P": 0, "L": 1, "ell": 1, "extra": 0}})
    assert run(capsys, ["rank", "--graph", bad])[0] == 1
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--graph", graphs["tadpole"], "--split", "x"])
    assert exc.value.code == 1


def test_check_existence(capsys, graphs):
    code, out, _ = run(capsys, ["check-existence", "--graph", graphs["tadpole"], "--ell", str(math.atanh(0.5))])
    doc = json.loads(out)
    assert doc["verdict"] == "violated, n=0"
    code, out, _ = run(capsys, ["check-existence", "--graph", graphs["tadpole"], "--ell", "1.0"])
    assert json.loads(out)["verdict"] == "holds"


def test_portrait(capsys, graphs, tmp_path):
    d = tmp_path / "portrait"
    code, out, _ = run(capsys, ["portrait", "--graph", graphs["tadpole"], "--split", "1,0",
                                "--output-dir", str(d)])
    assert code == 0
    assert (d / "portrait.svg").read_text().startswith("<svg")
    assert json.loads(out)["max_level_deviation"] < 1e-8


def test_portrait_on_homoclinic(capsys, tmp_path):
    # H = P gives theta = 1, whose core orbit lies on the level F = 0
    g = write_graph(tmp_path, "line", {"regular": {"H": 1, "P": 1, "L": 0, "ell": 1.0}})
    code, out, _ = run(capsys, ["portrait", "--graph", g, "--split", "1,0"])
    doc = json.loads(out)
    assert abs(doc["core_level"]) < 1e-8 and doc["max_level_deviation"] < 1e-8


def test_sweep(capsys, graphs, tmp_path):
    d = tmp_path / "sweep"
    code, out, _ = run(capsys, ["sweep", "--graph", graphs["fork"], "--ell-range", "1", "16",
                                "--points", "4", "--output-dir", str(d)])
    assert code == 0
    with open(d / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {float(r["ell"]) for r in rows} == {1.0, 6.0, 11.0, 16.0}
    assert json.loads(out)["concentrated_overtakes_at"] is not None


def test_json_format():
    text = dumps({"b": 0.1, "a": [1, 2.0], "c": None, "d": float("nan")})
    assert text.index('"b"') < text.index('"a"')
    assert "0.10000000000000001" in text
    assert json.loads(text)["d"] is None


def test_determinism(capsys, graphs):
    a = run(capsys, ["rank", "--graph", graphs["fork"], "--ell", "12"])[1]
    b = run(capsys, ["rank", "--graph", graphs["fork"], "--ell", "12"])[1]
    assert a == b
