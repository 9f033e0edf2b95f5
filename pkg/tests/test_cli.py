import json
from pathlib import Path

import pytest

from hybridsurgery import cli

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


def test_teleport_report(capsys):
    code, rep = report(capsys, "run-protocol", "teleport-s", "--seed", "3")
    assert code == 0
    assert rep["status"] == "pass"
    assert rep["schema_version"] == 1
    assert rep["config"]["seed"] == 3
    assert rep["payload"]["fidelity"] == pytest.approx(1.0, abs=1e-9)


def test_reports_are_deterministic(capsys):
    _, a, _ = run(capsys, "run-protocol", "magic-two-qubit", "--seed", "5")
    _, b, _ = run(capsys, "run-protocol", "magic-two-qubit", "--seed", "5")
    assert a == b


def test_forced_record(capsys):
    code, rep = report(capsys, "run-protocol", "teleport-s", "--record", '{"m_XX": 1, "m_Z": 2}')
    assert code == 0
    assert rep["payload"]["record"]["entries"] == [["m_XX", 1], ["m_Z", 2]]


def test_missing_record_key_is_a_usage_error(capsys):
    code, rep = report(capsys, "run-protocol", "teleport-s", "--record", '{"m_XX": 1}')
    assert code == 2
    assert rep["status"] == "error"
    assert "m_Z" in rep["error"]


@pytest.mark.parametrize(
    "argv",
    [
        ("t-gate", "--n", "2", "--exhaustive"),
        ("t-magic", "--n", "3"),
        ("gate-two-qubit", "--exhaustive"),
        ("s3-qubit",),
        ("s3-qutrit", "--theta", "-1"),
    ],
)
def test_protocols_pass(capsys, argv):
    code, rep = report(capsys, "run-protocol", *argv)
    assert code == 0, rep.get("error")
    assert all(c["ok"] for c in rep["checks"])


def test_output_file_and_summary(capsys, tmp_path):
    target = tmp_path / "r.json"
    code, out, _ = run(capsys, "run-protocol", "teleport-s", "-o", str(target))
    assert code == 0
    assert "PASS" in out and "status: pass" in out
    assert json.loads(target.read_text())["status"] == "pass"


@pytest.mark.parametrize("name", sorted(p.name for p in FIXTURES.glob("*.fixture")))
def test_verify_fixtures(capsys, name):
    code, rep = report(capsys, "verify", str(FIXTURES / name))
    assert code == 0
    assert rep["checks"] and all(c["ok"] for c in rep["checks"])


def test_verify_reports_failures(capsys, tmp_path):
    bad = tmp_path / "algebras-bad.fixture"
    bad.write_text("# kind: algebras\nfermion ; Z2 ; 1 (+) e m ; lagrangian\n")
    code, rep = report(capsys, "verify", str(bad))
    assert code == 1
    assert rep["status"] == "fail"


def test_verify_missing_file(capsys, tmp_path):
    code, rep = report(capsys, "verify", str(tmp_path / "nope.fixture"))
    assert code == 2


def test_verify_parallel_matches_serial(capsys):
    path = str(FIXTURES / "folded-lagrangians.fixture")
    _, a, _ = run(capsys, "verify", path)
    _, b, _ = run(capsys, "verify", path, "--jobs", "2")
    assert json.loads(a)["checks"] == json.loads(b)["checks"]


def test_cross_check(capsys):
    code, rep = report(capsys, "cross-check", "--fragment", "d4-z2", "--inputs", "random", "--seed", "2")
    assert code == 0
    assert rep["status"] == "pass"


def test_cross_check_cap_refusal(capsys, monkeypatch):
    monkeypatch.setenv("HYBRIDSURGERY_CAP_AMPLITUDES", "100")
    code, out, err = run(capsys, "cross-check", "--fragment", "d4-z2")
    rep = json.loads(out)
    assert code == 2
    assert rep["error"] == "refused: state needs 4096 amplitudes, cap is 100"
    assert "refused" in err


def test_syndrome_table_csv(capsys, tmp_path):
    target = tmp_path / "table.csv"
    code, rep = report(capsys, "syndrome-table", "--csv", str(target), "--edge", "H(0,1)")
    assert code == 0
    assert rep["config"]["edge"] == "H(0,1)"
    assert target.read_text().splitlines()[0] == "error,edge,syndrome,anyon"


def test_anyons_command(capsys):
    code, rep = report(capsys, "anyons", "D4", "--s-matrix")
    assert code == 0
    assert len(rep["payload"]["anyons"]) == 22


def test_unknown_protocol_is_a_usage_error(capsys):
    code, rep = report(capsys, "run-protocol", "no-such-protocol")
    assert code == 2
    assert rep["status"] == "error"


def test_bad_arguments_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["cross-check", "--rows", "many"])
    assert exc.value.code == 2
