import json
import subprocess
import sys

import pytest

from stabring.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(text):
    return json.loads(text)


def test_run_report_and_trace(capsys, tmp_path):
    trace = tmp_path / "t.txt"
    code, out, _ = run_cli(capsys, "run", "--protocol", "safe-unary", "--n", "3", "--seed", "1",
                           "--budget", "3000", "--trace", str(trace))
    assert code == 0
    rep = report(out)
    assert rep["seed"] == 1 and rep["revision"].startswith("stabring-")
    assert rep["outcome"]["converged"] and rep["artifacts"] == [str(trace)]
    lines = trace.read_text().splitlines()
    assert lines[1].startswith("init ") and lines[-1].startswith("final ")


def test_run_is_deterministic(capsys):
    args = ("run", "--protocol", "regular-bot", "--n", "4", "--seed", "9", "--budget", "2000")
    _, a, _ = run_cli(capsys, *args)
    _, b, _ = run_cli(capsys, *args)
    assert report(a)["outcome"] == report(b)["outcome"]


def test_run_with_init(capsys):
    code, out, _ = run_cli(capsys, "run", "--protocol", "dijkstra-central", "--n", "3", "--k", "3", "--seed", "0",
                           "--schedule", "central-random", "--init", "x=[0,0,0]", "--budget", "5")
    assert code == 0 and report(out)["outcome"]["first_exactly_one_privileged"] == 0


def test_verify_lowerbound(capsys, tmp_path):
    out_file = tmp_path / "r.json"
    code, out, _ = run_cli(capsys, "verify", "lowerbound", "--out", str(out_file))
    rep = report(out)
    assert code == 0 and rep["outcome"]["kind"] == "lasso"
    assert rep["outcome"]["every_cycle_state_uses_all_labels"]
    assert report(out_file.read_text()) == rep


@pytest.mark.parametrize("protocol,n,k,code", [("dijkstra-central", 3, 3, 0), ("dijkstra-rw", 3, 4, 1)])
def test_verify_exhaustive(capsys, protocol, n, k, code):
    got, out, _ = run_cli(capsys, "verify", "converge-exhaustive", "--protocol", protocol,
                          "--n", str(n), "--k", str(k))
    assert got == code
    assert report(out)["outcome"]["kind"] == ("converges" if code == 0 else "lasso")


def test_verify_closure_and_scenarios(capsys):
    code, out, _ = run_cli(capsys, "verify", "closure", "--protocol", "safe-unary", "--seed", "2",
                           "--trials", "5", "--budget", "1000")
    assert code == 0 and report(out)["outcome"]["writes_per_change_ok"]
    code, out, _ = run_cli(capsys, "verify", "scenarios")
    assert code == 0 and report(out)["outcome"]["all_passed"]


def test_verify_closure_flags_naive(capsys):
    code, out, _ = run_cli(capsys, "verify", "closure", "--protocol", "naive-regular", "--seed", "0",
                           "--trials", "50", "--budget", "2000")
    rep = report(out)["outcome"]
    assert code == 1 and rep["violations"] > 0 and rep["first_violation"]["trace"]


def test_markov_outputs(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "markov", "--p", "1", "--emit", "matrix", "--format", "csv")
    assert code == 0 and out.splitlines()[1] == "000,2/3,0,0,0,1/3,0,0,0"
    code, out, _ = run_cli(capsys, "markov", "--p", "3/4", "--emit", "mass", "--check-paper")
    rep = report(out)["outcome"]
    assert code == 0 and rep["mass"] == "9/10" and "note" in rep["check"]
    csv_file = tmp_path / "eq.csv"
    code, out, _ = run_cli(capsys, "markov", "--p", "0.25", "--csv", str(csv_file))
    assert code == 0 and report(out)["outcome"]["equilibrium"][2] == "1/4"
    assert csv_file.read_text().splitlines()[3] == "010,1/4,0"


@pytest.mark.parametrize("argv,code", [
    (["run", "--protocol", "bogus"], 2),
    (["verify", "closure", "--protocol", "safe-unary"], 2),
    (["markov", "--p", "3/2"], 2),
    (["markov", "--p", "1", "--n", "4"], 2),
    (["markov", "--p", "1", "--n", "13", "--extended"], 3),
    (["verify", "converge-exhaustive", "--protocol", "dijkstra-central", "--n", "6", "--k", "6",
      "--bound", "100"], 3),
    (["verify", "scenarios", "--file", "/nonexistent.scn"], 2),
])
def test_exit_codes(capsys, argv, code):
    assert run_cli(capsys, *argv)[0] == code


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "stabring", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip().startswith("stabring-")
