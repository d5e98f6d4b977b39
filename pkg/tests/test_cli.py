import json
import subprocess
import sys

import pytest

from conftest import PROGRAMS
from usol.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, EXIT_UNKNOWN, run_cli

PAPER = str(PROGRAMS / "paper.ccs")
SERVER = str(PROGRAMS / "server.ccs")
BROKEN = str(PROGRAMS / "broken.ccs")


def run(capsys, *argv):
    code = run_cli(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_check_golden(capsys):
    code, out, _ = run(capsys, "check", PAPER, "--system", "S1", "--candidates", "CK,CH")
    assert code == EXIT_OK
    assert out.startswith("system S1: certified-equal")


def test_diverge_strange(capsys):
    code, out, _ = run(capsys, "diverge", PAPER, "--system", "Strange")
    assert code == EXIT_FAIL
    assert "divergences: non-innocuous" in out and "witness: prefix" in out


def test_parse_broken(capsys):
    code, _, err = run(capsys, "parse", BROKEN)
    assert code == EXIT_INPUT
    assert err.startswith("error: ") and "broken.ccs:1:20: syntax error" in err


def test_parse_ok(capsys):
    code, out, _ = run(capsys, "parse", SERVER)
    assert code == EXIT_OK and "after desugaring" in out


@pytest.mark.parametrize("argv,code", [
    (["diverge", PAPER, "--system", "Innoc"], EXIT_OK),
    (["diverge", PAPER, "--system", "S1"], EXIT_OK),
    (["diverge", PAPER, "--system", "Loop"], EXIT_FAIL),
    (["check", PAPER, "--system", "Tau", "--candidates", "K"], EXIT_FAIL),
    (["check", PAPER, "--system", "S1", "--candidates", "CK", "--rel", "trace-eq"], EXIT_OK),
    (["check", PAPER, "--system", "Nope", "--candidates", "K"], EXIT_INPUT),
    (["check", PAPER, "--system", "S1", "--candidates", "K", "--rel", "inf-trace"], EXIT_INPUT),
    (["equiv", PAPER, "--lhs", "a.(b + c)", "--rhs", "a.b + a.c"], EXIT_FAIL),
    (["equiv", PAPER, "--lhs", "K", "--rhs", "H"], EXIT_OK),
    (["equiv", PAPER, "--lhs", "a", "--rhs", "a + b", "--rel", "sim"], EXIT_OK),
    (["equiv", PAPER, "--lhs", "Nope", "--rhs", "0"], EXIT_INPUT),
    (["unfold", PAPER, "--system", "S1", "-n", "3"], EXIT_OK),
    (["unfold", PAPER, "--system", "S1", "-n", "0"], EXIT_INPUT),
    (["preorder", PAPER, "--system", "Pre", "--candidate", "Twice"], EXIT_OK),
    (["preorder", PAPER, "--system", "S1", "--candidate", "#sol", "--direction", "min"], EXIT_OK),
    (["preorder", PAPER, "--system", "Pre", "--candidate", "c.0"], EXIT_FAIL),
    (["lts", PAPER, "--term", "K", "--max-states", "2"], EXIT_UNKNOWN),
    (["parse", "/nonexistent/file.ccs"], EXIT_INPUT),
    (["bogus"], EXIT_INPUT),
])
def test_exit_codes(capsys, argv, code):
    assert run(capsys, *argv)[0] == code


def test_equiv_prints_formula(capsys):
    _, out, _ = run(capsys, "equiv", PAPER, "--lhs", "a.(b + c)", "--rhs", "a.b + a.c")
    assert "weak-bisim: fails" in out
    assert json.loads(out.split("\n", 1)[1])["kind"] == "formula"


def test_lts_exports(capsys, tmp_path):
    dot, js = tmp_path / "k.dot", tmp_path / "k.json"
    code, out, _ = run(capsys, "lts", PAPER, "--term", "K", "--dot", str(dot), "--json", str(js), "--show")
    assert code == EXIT_OK and out.startswith("3 states, 3 transitions, complete")
    assert dot.read_text().startswith("digraph")
    assert len(json.loads(js.read_text())["states"]) == 3


def test_certificate_file_and_replay(capsys, tmp_path):
    cert = tmp_path / "s1.json"
    code, _, _ = run(capsys, "check", PAPER, "--system", "S1", "--candidates", "CK,CH", "--cert", str(cert))
    assert code == EXIT_OK
    assert json.loads(cert.read_text())["verdict"] == "certified-equal"
    assert run(capsys, "replay", PAPER, str(cert))[0] == EXIT_OK
    data = json.loads(cert.read_text())
    data["theorem"] = "something-else"
    cert.write_text(json.dumps(data))
    code, out, _ = run(capsys, "replay", PAPER, str(cert))
    assert code == EXIT_FAIL and "mismatch: theorem differs" in out


def test_replay_of_term_candidate(capsys, tmp_path):
    cert = tmp_path / "pre.json"
    assert run(capsys, "preorder", PAPER, "--system", "Pre", "--candidate", "a.a",
               "--cert", str(cert))[0] == EXIT_OK
    assert run(capsys, "replay", PAPER, str(cert))[0] == EXIT_OK


def test_print_cert_is_json(capsys):
    _, out, _ = run(capsys, "check", PAPER, "--system", "S1", "--candidates", "CK", "--print-cert",
                    "--no-cross-check")
    doc = out[out.index("{"):]
    assert json.loads(doc)["config"]["cross_check"] is False


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "usol", "check", PAPER, "--system", "S1",
                           "--candidates", "CK,CH"], capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "usol", "parse", BROKEN],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 3
