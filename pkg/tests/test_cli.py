import csv
import io
import json

import numpy as np
import pytest

from becturbo.cli import main

TABLE_HALF = "f2=0.801,f4=0.101,f8=0.046,f12=0.052"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_csv(capsys):
    code, out, _ = run(capsys, "analyze", "--grid", "3")
    assert code == 0
    assert "# forward alphabet: {0} {0,1} {0,2} {0,3} {0,1,2,3}" in out
    body = [l for l in out.splitlines() if not l.startswith("#")]
    rows = list(csv.DictReader(io.StringIO("\n".join(body))))
    assert len(rows) == 9 and set(rows[0]) == {"p", "q", "pattern", "P_ext"}
    cell = next(r for r in rows if float(r["p"]) == 0.5 and float(r["q"]) == 0.5)
    assert float(cell["P_ext"]) == pytest.approx(173 / 338)


def test_analyze_json(capsys):
    code, out, _ = run(capsys, "analyze", "--grid", "2", "--format", "json", "--pattern", "1,0,0")
    doc = json.loads(out)
    assert code == 0 and doc["catastrophic"] is True
    assert doc["M_F"][2][4] == "pq"
    assert len(doc["grid"]) == 4


def test_threshold(capsys):
    code, out, _ = run(capsys, "threshold", "--profile", TABLE_HALF, "--rate", "0.5")
    doc = json.loads(out)
    assert code == 0
    assert doc["pattern"] == "1,0,1,0,0,0"
    assert doc["phi_p"] == pytest.approx(2 / 3)
    assert doc["gap"] == pytest.approx(1 - doc["rate"] - doc["p_th"])
    assert abs(doc["p_th"] - 0.49) < 5e-3


def test_threshold_pattern_flag(capsys):
    code, out, _ = run(capsys, "threshold", "--pattern", "1,0", "--width", "1e-3")
    assert code == 0 and abs(json.loads(out)["p_th"] - 0.4729) < 1.5e-3


def test_optimize_json_lines(capsys, tmp_path):
    dest = tmp_path / "opt.jsonl"
    code, _, _ = run(capsys, "optimize", "--rate", "0.5", "--dmax", "4", "--generations", "2",
                     "--population", "6", "--seed", "1", "--out", str(dest))
    lines = [json.loads(l) for l in dest.read_text().splitlines()]
    assert code == 0
    assert [l["generation"] for l in lines[:-1]] == [0, 1, 2]
    assert lines[-1]["final"] is True
    assert {"profile", "phi_p", "p_th"} <= set(lines[0])


def test_interleave(capsys, tmp_path):
    dest = tmp_path / "perm.txt"
    code, out, _ = run(capsys, "interleave", "--K", "60", "--profile", TABLE_HALF, "--rate", "0.5",
                       "--seedless", "--out", str(dest))
    assert code == 0
    perm = np.loadtxt(dest, dtype=int)
    side = json.loads((tmp_path / "perm.txt.json").read_text())
    assert sorted(perm.tolist()) == list(range(1, side["N"] + 1))
    assert sum(side["degree_counts"].values()) == 60
    assert side["girth_lower_bound"] <= side["girth"] <= side["girth_upper_bound"]
    assert json.loads(out) == side


def test_simulate_csv_and_file_interleaver(capsys, tmp_path):
    dest = tmp_path / "perm.txt"
    run(capsys, "interleave", "--K", "50", "--out", str(dest))
    code, out, _ = run(capsys, "simulate", "--K", "50", "--p0", "0,0.9", "--interleaver", str(dest),
                       "--max-trials", "20", "--target-errors", "5")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0
    assert rows[0]["frame_errors"] == "0" and int(rows[0]["trials"]) == 20
    assert int(rows[1]["frame_errors"]) == 5


def test_simulate_json(capsys):
    code, out, _ = run(capsys, "simulate", "--K", "40", "--p0", "0.3", "--interleaver", "random",
                       "--pattern", "1,0", "--max-trials", "10", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["config"]["pattern"] == "1,0"
    assert doc["results"][0]["trials"] == 10


@pytest.mark.parametrize("argv", [
    ["threshold", "--rate", "0.2"],
    ["threshold", "--pattern", "1,2"],
    ["threshold", "--pattern", "1,0", "--rate", "0.5"],
    ["threshold", "--profile", "f2=0.5"],
    ["analyze", "--code", "1,5/6"],
    ["simulate", "--K", "10", "--p0", "0.3", "--interleaver", "/nonexistent/perm.txt"],
    ["optimize", "--rate", "0.5", "--population", "2"],
])
def test_rejected_inputs(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code != 0 and err.startswith("error:")


def test_missing_required_flag():
    with pytest.raises(SystemExit) as e:
        main(["simulate", "--p0", "0.3"])
    assert e.value.code != 0
