import json
import subprocess
import sys

import pytest

from rankone import __version__
from rankone.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_schema_build_and_validate(tmp_path, capsys):
    path = tmp_path / "s.json"
    code, _, _ = run(capsys, "schema", "build", "--depth", 2, "--out", path)
    assert code == 0
    code, out, _ = run(capsys, "schema", "validate", "--schema", path)
    assert code == 0
    doc = json.loads(out)
    assert doc["version"] == __version__
    assert doc["result"] == {"valid": True, "violations": []}

    bad = json.loads(path.read_text())
    bad["stages"][1]["spacers"][2] = "11302"
    path.write_text(json.dumps(bad))
    code, out, err = run(capsys, "schema", "validate", "--schema", path)
    assert code == 1
    assert "spacer growth at (2,3)" in json.loads(out)["result"]["violations"]
    assert "violation:" in err


def test_schema_policy_file(tmp_path, capsys):
    pol = tmp_path / "p.json"
    pol.write_text(json.dumps({"1": [20, 201]}))
    code, out, _ = run(capsys, "schema", "build", "--depth", 1, "--policy", pol)
    assert code == 0
    assert json.loads(out)["heights"][1] == "223"
    pol.write_text(json.dumps({"1": [9, 201]}))
    code, _, err = run(capsys, "schema", "build", "--depth", 1, "--policy", pol)
    assert code == 2 and "first spacer at (1,1)" in err


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["schema", "build", "--depth", "0"])
    assert info.value.code == 2
    capsys.readouterr()
    code, _, err = run(capsys, "schema", "validate", "--schema", "/nonexistent.json")
    assert code == 2 and "no such file" in err
    code, _, _ = run(capsys, "correlate", "--n-max", 5)
    assert code == 2


def test_setops(tmp_path, capsys):
    a = tmp_path / "a.json"
    a.write_text(json.dumps({"stage": 1, "intervals": [["0", "1"]]}))
    code, out, _ = run(capsys, "setops", "power", "--depth", 1, "--a", a, "--m", 1)
    assert code == 0
    assert json.loads(out)["result"]["set"] == {"stage": 2, "intervals": [["1", "2"], ["12", "13"]]}
    code, out, _ = run(capsys, "setops", "measure", "--depth", 1, "--a", a)
    assert json.loads(out)["result"]["measure"] == "1"
    code, _, err = run(capsys, "setops", "intersect", "--depth", 1, "--a", a)
    assert code == 2 and "--b" in err


def test_correlate_csv(capsys):
    code, out, _ = run(capsys, "correlate", "--depth", 1, "--stage", 1, "--n-max", 12)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == f"# rankone {__version__}"
    data = [line for line in lines if not line.startswith("#")]
    assert data[0] == "n,rho_num,rho_den,rho_float,partial_sum_float"
    assert data[1].split(",")[:3] == ["0", "1", "1"]
    assert data[12].split(",")[:3] == ["11", "1", "2"]


def test_gram_exit_codes(capsys):
    code, out, _ = run(capsys, "gram", "--k", 1)
    assert code == 0 and json.loads(out)["result"]["independent"]
    # shifts of X_2 by multiples of n_2 first meet at 11 n_2
    code, out, _ = run(capsys, "gram", "--k", 1, "--L", 11)
    assert code == 0
    code, out, _ = run(capsys, "gram", "--k", 1, "--L", 12)
    assert code == 1
    assert json.loads(out)["result"]["witness"] is not None


def test_family_certify_branches(tmp_path, capsys):
    fam = tmp_path / "f.json"
    fam.write_text(json.dumps({"bits": [], "schedule": [{"k": 1, "j": 1, "L": 12}]}))
    code, out, _ = run(capsys, "family", "certify", "--family", fam, "--bits", "1", "--k", 1)
    assert code == 0
    doc = json.loads(out)["result"]
    assert doc["certificate"]["status"] == "certified"
    assert any("raised" in n for n in doc["notes"])
    code, out, _ = run(capsys, "family", "certify", "--family", fam, "--bits", "0", "--k", 1)
    assert code == 1
    assert json.loads(out)["result"]["certificate"]["witness"]["pair"] == [1, 12]


def test_entropy_is_reproducible(capsys):
    argv = ("entropy", "--k", 1, "--samples", 20000, "--seed", 5)
    outs = [run(capsys, *argv, "--workers", w)[1] for w in (1, 1, 4)]
    assert outs[0] == outs[1] == outs[2]
    assert "workers" not in json.loads(outs[0])["config"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "rankone", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and __version__ in proc.stdout
