import json

import pytest

from su2sps.cli_report import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_seq_json(capsys):
    code, out = run(capsys, "seq", "--n", "2", "--max", "5", "--json")
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["pass"] is True
    assert data["data"]["d"] == [1, 3, 8, 21, 55, 144]


def test_k_theory_output(capsys):
    code, out = run(capsys, "kk", "--n", "3", "--k-theory")
    assert code == EXIT_OK
    assert json.loads(out) == {"K0": {"rank": 0, "torsion": [2]}, "K1": {"rank": 0, "torsion": []}, "euler": -2}


@pytest.mark.parametrize(
    "argv",
    [
        ["seq", "--n", "0"],
        ["build", "--n", "2"],
        ["fusion", "--n", "1", "--k", "-1", "--m", "1"],
        ["nonsense"],
        ["ideal", "--n", "1", "--gens", "x0*x5"],
        ["ideal", "--n", "1", "--gens", "x0 $ x1"],
    ],
)
def test_usage_errors(capsys, argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == EXIT_USAGE


def test_build_then_verify_round_trip(tmp_path, capsys):
    path = tmp_path / "sys.json"
    code, _ = run(capsys, "build", "--n", "2", "--max-degree", "4", "--out", str(path))
    assert code == EXIT_OK and path.exists()
    code_file, out_file = run(capsys, "verify", "--in", str(path), "--json")
    code_gen, out_gen = run(capsys, "verify", "--n", "2", "--max-degree", "4", "--json")
    assert code_file == code_gen == EXIT_OK
    a, b = json.loads(out_file), json.loads(out_gen)
    assert a["reports"] == b["reports"]


def test_json_is_deterministic(capsys):
    _, first = run(capsys, "toeplitz", "--n", "1", "--max-degree", "4", "--relations", "--decay", "--json")
    _, second = run(capsys, "toeplitz", "--n", "1", "--max-degree", "4", "--relations", "--decay", "--json")
    assert first == second
    assert "timings" not in json.loads(first)


def test_rep_check_json(capsys):
    code, out = run(capsys, "rep", "--n", "3", "--check", "--json")
    assert code == EXIT_OK and json.loads(out)["pass"] is True


def test_timings_on_request(capsys):
    _, out = run(capsys, "rep", "--n", "2", "--check", "--json", "--timings")
    assert "timings" in json.loads(out)


def test_failing_tolerance_gives_exit_one(capsys):
    code, out = run(capsys, "fusion", "--n", "2", "--k", "1", "--m", "2", "--verify-all", "--tol", "1e-30")
    assert code == EXIT_FAIL
    assert "FAIL" in out


def test_ideal_dims(capsys):
    code, out = run(capsys, "ideal", "--n", "1", "--gens", "x0*x1 - x1*x0", "--max", "4", "--dims", "--json")
    assert code == EXIT_OK
    data = json.loads(out)["data"]
    assert data["system_dims"] == [1, 2, 3, 4, 5]
    assert data["ideal_dims"] == [0, 1, 4, 11]


def test_threads_do_not_change_reports(capsys):
    _, one = run(capsys, "verify", "--n", "1", "--max-degree", "4", "--json")
    _, many = run(capsys, "verify", "--n", "1", "--max-degree", "4", "--json", "--threads", "3")
    assert json.loads(one)["reports"] == json.loads(many)["reports"]
