import csv
import io as _io
import json
import re
import subprocess
import sys

import pytest

from conftest import FIXTURES
from edr.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def solve(capsys, name, *extra):
    code, out, _ = run(capsys, "solve", "--input", name, *extra)
    return code, json.loads(out)


def test_solve_example1(capsys):
    code, doc = solve(capsys, "example1.json")
    assert code == 0
    assert doc["mode"] == "exact"
    assert doc["distribution"] == {"A": "300", "B": "300", "C": "300", "D": "100"}


def test_solve_62(capsys):
    code, doc = solve(capsys, "examples/example_6_2.json")
    assert code == 0 and doc["distribution"] == {"x": "12", "y": "24", "z": "24"}


def test_solve_one_agent(capsys, tmp_path):
    path = tmp_path / "solo.json"
    path.write_text(json.dumps({"charities": ["a", "b"], "agents": [{"name": "s", "contribution": "6", "values": {"a": "1", "b": "2"}}]}))
    code, doc = solve(capsys, str(path))
    assert code == 0 and doc["distribution"] == {"a": "2", "b": "4"}


def test_solve_methods_agree(capsys):
    _, a = solve(capsys, "example1.json", "--method", "exact-binary")
    _, b = solve(capsys, "example1.json", "--method", "auto")
    assert a["distribution"] == b["distribution"]
    code, c = solve(capsys, "example1.json", "--method", "dynamics", "--tol", "1/1000000000000")
    assert code == 0 and c["mode"] == "float"
    assert abs(float(c["distribution"]["D"]) - 100) < 1e-8


def test_solve_output_and_decimals(capsys, tmp_path):
    out = tmp_path / "r.json"
    assert main(["solve", "--input", "footnote_eff.json", "--output", str(out), "--emit-decimals", "3"]) == 0
    assert json.loads(out.read_text())["distribution"]["a"] == "0.667"


def test_solve_unconverged(capsys):
    code, _, _ = run(capsys, "solve", "--input", "example2.json", "--method", "dynamics", "--max-iter", "1")
    assert code == 2


def test_solve_malformed(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"charities": ["a"], "agents": [{"name": "x", "contribution": "1", "values": {"a": 1}}]}')
    code, _, err = run(capsys, "solve", "--input", str(bad))
    assert code == 1 and "agents[0].values.a" in err
    code, _, err = run(capsys, "solve", "--input", str(tmp_path / "missing.json"))
    assert code == 1


def test_exact_binary_rejects_weights(capsys):
    code, _, err = run(capsys, "solve", "--input", "example_6_2.json", "--method", "exact-binary")
    assert code == 1 and "binary" in err


def test_bad_flag_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--input", "example1.json", "--method", "newton"])
    assert exc.value.code == 1


def test_dynamics_walkthrough(capsys, tmp_path):
    seq = tmp_path / "seq.txt"
    seq.write_text("2, 1, 2, 1\n")
    trace = tmp_path / "t.csv"
    code, out, _ = run(capsys, "dynamics", "--input", "example1.json", "--sequence", f"file:{seq}", "--rounds", "4", "--trace", str(trace))
    assert code == 0
    rows = list(csv.DictReader(trace.read_text().splitlines()))
    assert [r["agent"] for r in rows] == ["2", "1", "2", "1"]
    assert [rows[-1][c] for c in "ABCD"] == ["300", "300", "300", "100"]
    assert rows[1]["A"] == "950/3"
    assert "residual=0" in out and "distance_to_equilibrium=0.0" in out


def test_dynamics_sequence_comments(capsys, tmp_path):
    seq = tmp_path / "seq.txt"
    seq.write_text("# comments are skipped\n2 1\n")
    code, out, err = run(capsys, "dynamics", "--input", "example1.json", "--sequence", f"file:{seq}", "--rounds", "4")
    assert code == 0 and out.splitlines()[-1].endswith("300,300,300,100")
    assert "final" in err


def test_dynamics_rounds_zero(capsys):
    code, out, _ = run(capsys, "dynamics", "--input", "example1.json", "--rounds", "0")
    assert code == 0 and out == "round,agent,shifted,potential,residual,A,B,C,D\n"


def test_dynamics_spend(capsys):
    code, out, err = run(capsys, "dynamics", "--input", "example1.json", "--mode", "spend", "--rounds", "50")
    assert code == 0
    final = dict(kv.split("=") for kv in err.split()[1:])
    for c, want in zip("ABCD", (300, 300, 300, 100)):
        assert abs(float(eval(final[c])) - want) <= 0.01 * want


def test_dynamics_experimental_window(capsys):
    code, _, err = run(capsys, "dynamics", "--input", "example1.json", "--mode", "spend", "--rounds", "10", "--experimental-window", "1")
    assert code == 0 and "exploratory" in err


def test_dynamics_random_sequence(capsys):
    code, out, _ = run(capsys, "dynamics", "--input", "example2.json", "--sequence", "random:15", "--rounds", "200", "--seed", "4")
    assert code == 0
    last = out.splitlines()[-1].split(",")
    assert abs(float(eval(last[5])) - 50) < 1e-3


@pytest.mark.parametrize("content", ["3 1\n", "1 x\n", "\n"])
def test_dynamics_bad_sequence_file(capsys, tmp_path, content):
    seq = tmp_path / "seq.txt"
    seq.write_text(content)
    code, _, _ = run(capsys, "dynamics", "--input", "example1.json", "--sequence", f"file:{seq}")
    assert code == 1


def test_dynamics_bad_sequence_spec(capsys):
    assert run(capsys, "dynamics", "--input", "example1.json", "--sequence", "random:1")[0] == 1
    assert run(capsys, "dynamics", "--input", "example1.json", "--sequence", "zigzag")[0] == 1
    assert run(capsys, "dynamics", "--input", "example1.json", "--mode", "spend", "--sequence", "random:3")[0] == 1


def test_verify(capsys, tmp_path):
    good = tmp_path / "d.json"
    good.write_text('["300", "300", "300", "100"]')
    code, out, _ = run(capsys, "verify", "--input", "example1.json", "--distribution", str(good))
    doc = json.loads(out)
    assert code == 0 and doc["certified"] and doc["efficient"]
    assert doc["lindahl"]["prices"]["1"] == {"A": "1", "B": "1", "C": "1", "D": "0"}
    bad = tmp_path / "e.json"
    bad.write_text('{"A": "250", "B": "250", "C": "250", "D": "250"}')
    code, out, _ = run(capsys, "verify", "--input", "example1.json", "--distribution", str(bad))
    doc = json.loads(out)
    assert code == 3 and not doc["certified"]
    assert doc["refutation"]["overfunded_charities"] == ["D"]


def test_verify_sum_mismatch(capsys, tmp_path):
    d = tmp_path / "d.json"
    d.write_text('["1", "1", "1", "1"]')
    assert run(capsys, "verify", "--input", "example1.json", "--distribution", str(d))[0] == 1


def test_verify_result_file(capsys, tmp_path):
    out = tmp_path / "r.json"
    main(["solve", "--input", "example_6_2.json", "--output", str(out)])
    capsys.readouterr()
    assert run(capsys, "verify", "--input", "example_6_2.json", "--distribution", str(out))[0] == 0


def test_verify_single_agent(capsys, tmp_path):
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"charities": ["a"], "agents": [{"name": "s", "contribution": "5", "values": {"a": "1"}}]}))
    d = tmp_path / "d.json"
    d.write_text('["5"]')
    assert run(capsys, "verify", "--input", str(p), "--distribution", str(d))[0] == 0


def test_probe(capsys, tmp_path):
    rep = tmp_path / "rep.json"
    code, out, _ = run(capsys, "probe", "--random", "4,5", "--property", "gsp", "--trials", "30", "--seed", "7", "--report", str(rep))
    assert code == 0 and "violations=0" in out
    assert json.loads(rep.read_text())["violations"] == 0


def test_probe_zero_trials(capsys):
    code, out, _ = run(capsys, "probe", "--property", "contrib-mono", "--trials", "0")
    assert code == 0 and json.loads(out)["trials"] == 0


def test_probe_gwelfare_expected(capsys):
    code, out, _ = run(capsys, "probe", "--input", "appendix_b.json", "--property", "gwelfare", "--p", "1", "--trials", "50")
    doc = json.loads(out)
    assert code == 0 and doc["expected_counterexample"] is True
    assert doc["notes"]["pinned"]["welfare_alternative"] == "6"


@pytest.mark.parametrize(
    "argv",
    [
        ["probe", "--property", "gsp", "--random", "4"],
        ["probe", "--property", "gwelfare", "--p", "0", "--input", "example1.json"],
        ["probe", "--property", "gsp", "--trials", "-1"],
        ["probe", "--property", "gsp", "--random", "2,2", "--input", "example1.json"],
    ],
)
def test_probe_bad_flags(capsys, argv):
    assert run(capsys, *argv)[0] == 1


def test_outputs_deterministic(capsys):
    _, a = solve(capsys, "example2.json")
    _, b = solve(capsys, "example2.json")
    a["solver"].pop("wall_time")
    b["solver"].pop("wall_time")
    assert a == b
    x = run(capsys, "probe", "--property", "pref-mono", "--trials", "10", "--seed", "3")[1]
    y = run(capsys, "probe", "--property", "pref-mono", "--trials", "10", "--seed", "3")[1]
    assert x == y


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "edr.cli", "solve", "--input", "appendix_b.json"], capture_output=True, text=True)
    assert out.returncode == 0 and json.loads(out.stdout)["distribution"] == {"a": "2", "b": "1"}
