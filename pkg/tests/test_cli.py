import json
import os

import pytest

from stlrepair.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def toy_scenario(tmp_path, formula="G[0,3] x >= -1"):
    doc = {
        "system": {
            "states": ["x"], "inputs": ["u"],
            "A": [[1]], "B": [[1]], "delta_t": 1.0, "x0": [0],
            "bounds": {"x": [-100, 100], "u": [-5, 5]},
        },
        "spec": {"formula": formula},
        "solver": {"horizon": 4},
    }
    p = tmp_path / "toy.json"
    p.write_text(json.dumps(doc))
    return str(p)


def test_unknown_scenario_is_an_error(capsys):
    code, _out, err = run(capsys, "synth", "does_not_exist")
    assert code == 1
    assert "no builtin scenario" in err


def test_synth_feasible_writes_trace(capsys, tmp_path):
    sc = toy_scenario(tmp_path)
    out = str(tmp_path / "artifacts")
    code, stdout, _ = run(capsys, "synth", sc, "--out", out)
    assert code == 0
    assert "status: feasible" in stdout
    assert os.path.exists(os.path.join(out, "trace.csv"))


def test_synth_infeasible_exit_code(capsys, tmp_path):
    sc = toy_scenario(tmp_path, "G[0,3] x >= 1000")
    code, stdout, _ = run(capsys, "synth", sc)
    assert code == 2
    assert "infeasible" in stdout


def test_monitor_round_trip(capsys, tmp_path):
    sc = toy_scenario(tmp_path)
    out = str(tmp_path / "a")
    run(capsys, "synth", sc, "--out", out)
    code, stdout, _ = run(capsys, "monitor", sc, "--trace",
                          os.path.join(out, "trace.csv"))
    assert code == 0
    assert "robustness:" in stdout and "satisfied" in stdout


def test_diagnose_feasible_and_infeasible(capsys, tmp_path):
    code, stdout, _ = run(capsys, "diagnose", toy_scenario(tmp_path))
    assert code == 0 and "feasible" in stdout
    code, stdout, _ = run(
        capsys, "diagnose", toy_scenario(tmp_path, "G[0,3] x >= 7"))
    assert code == 2
    assert "x >= 7" in stdout and "steps [0, 1, 2, 3]" in stdout


def test_repair_reports_and_exit_code(capsys, tmp_path):
    sc = toy_scenario(tmp_path, "G[0,3] x >= 7")
    out = str(tmp_path / "r")
    code, stdout, _ = run(capsys, "repair", sc, "--out", out)
    assert code == 2
    assert "status: repaired" in stdout
    doc = json.loads(open(os.path.join(out, "report.json")).read())
    assert doc["status"] == "repaired"
    assert doc["predicate_shifts"]


def test_repair_weights_file(capsys, tmp_path):
    sc = toy_scenario(tmp_path, "G[0,2] u >= 3 & G[0,2] u <= 1")
    wf = tmp_path / "weights.json"
    wf.write_text(json.dumps({"u >= 3": 1.0, "u <= 1": 100.0}))
    code, stdout, _ = run(capsys, "repair", sc, "--weights", str(wf))
    assert code == 2
    # the cheap side gives way
    assert "u >= 3  ->" in stdout.replace("shift node", "").split("repaired")[0] \
        or "u >= " in stdout


def test_repair_interval_mode(capsys, tmp_path):
    doc_path = toy_scenario(tmp_path, "G[0,3] x >= 2.5")
    code, stdout, _ = run(capsys, "repair", doc_path, "--mode", "interval")
    assert code == 2
    assert "re-time node" in stdout


def test_mpc_exit_codes(capsys, tmp_path):
    code, stdout, _ = run(capsys, "mpc", toy_scenario(tmp_path),
                          "--steps", "2")
    assert code == 0 and "completed" in stdout
    code, stdout, _ = run(capsys, "mpc", "collision_avoidance")
    assert code == 2 and "failed at step: 0" in stdout


def test_cegis_requires_adversarial_scenario(capsys, tmp_path):
    code, _out, err = run(capsys, "cegis", toy_scenario(tmp_path))
    assert code == 1
    assert "not adversarial" in err


def test_cegis_race(capsys, tmp_path):
    out = str(tmp_path / "c")
    code, stdout, _ = run(capsys, "cegis", "race_adversarial", "--out", out)
    assert code == 2
    assert "pruned to [0.0, 1.22" in stdout
    assert "chosen repair: box" in stdout
    doc = json.loads(open(os.path.join(out, "report.json")).read())
    assert doc["status"] == "repaired"
    assert doc["box_branch"]["prunings"] == 78


def test_dump_milp(capsys, tmp_path):
    sc = toy_scenario(tmp_path)
    out = str(tmp_path / "m")
    code, _stdout, _ = run(capsys, "synth", sc, "--out", out, "--dump-milp")
    assert code == 0
    dump = open(os.path.join(out, "milp.txt")).read()
    assert dump.startswith("problem")
    assert "constraints" in dump


def test_reports_are_byte_identical(capsys, tmp_path):
    sc = toy_scenario(tmp_path, "G[0,3] x >= 7")
    out1, out2 = str(tmp_path / "r1"), str(tmp_path / "r2")
    run(capsys, "repair", sc, "--out", out1)
    run(capsys, "repair", sc, "--out", out2)
    for name in ("report.txt", "report.json"):
        a = open(os.path.join(out1, name), "rb").read()
        b = open(os.path.join(out2, name), "rb").read()
        assert a == b, name
