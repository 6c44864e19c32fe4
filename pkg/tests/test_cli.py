import json

import pytest

from ncgpep.cli import main


def test_bounds_table(capsys):
    assert main(["bounds", "--q", "0.5,0.1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("q,")
    assert len(lines) == 3


def test_verify_identities(capsys):
    assert main(["verify-identities", "--trials", "200", "--dim", "3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert max(out["max_residual"].values()) <= 1e-9


def test_fixture_validation_exit_codes(capsys):
    assert main(["counterexample", "validate", "example1"]) == 1
    assert json.loads(capsys.readouterr().out)["worst_pair"] == ["0", "1"]
    assert main(["counterexample", "validate", "example1", "--feas-tol", "1e-5"]) == 0
    assert json.loads(capsys.readouterr().out)["ok"]


def test_simulate_writes_csv(tmp_path):
    out = tmp_path / "run.csv"
    assert main(["--out", str(out), "simulate", "--method", "FR", "--iters", "4", "--dim", "6"]) == 0
    rows = out.read_text().strip().splitlines()
    assert rows[0].startswith("k,f_k")
    assert 2 <= len(rows) <= 6


def test_pep_solve_report(capsys):
    assert main(["pep-solve", "--family", "exact", "--method", "PRP", "--q", "0.5"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["upper_bound"] == pytest.approx(1 / 9, rel=1e-3)
    assert "wall_time" not in rep


def test_bad_method_is_rejected():
    with pytest.raises(SystemExit):
        main(["simulate", "--method", "XYZ"])
