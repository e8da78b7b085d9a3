import json

import pytest

from lo_resilience.cli import THREADS_ENV, main, parse_weights_text
from lo_resilience.errors import UsageError


def run_json(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    assert code == 0, out
    return json.loads(out)


def test_resilience_examples(capsys):
    rec = run_json(capsys, "resilience", "--weights", "1 1 1 1", "--signs", "++++")
    assert rec["outputs"]["value"] == "2" and len(rec["outputs"]["witness"]) == 2
    rec = run_json(capsys, "resilience", "--weights", "1 1 1 1", "--signs", "++-+", "--x", "2")
    assert rec["outputs"]["value"] == "0"
    rec = run_json(capsys, "resilience", "--weights", "1 2 4", "--signs", "+++", "--x", "6")
    assert rec["outputs"]["value"] == "inf"


def test_record_shape(capsys):
    rec = run_json(capsys, "resilience", "--weights", "1 2 4", "--signs", "+++", "--x", "5",
                   "--no-timing")
    assert set(rec) == {"schema", "command", "inputs", "outputs", "seed", "version",
                        "wall_time_ms"}
    assert rec["wall_time_ms"] == 0
    assert rec["inputs"]["weights"] == "1 2 4" and "threads" not in rec["inputs"]


def test_bounded_reports_exceeded(capsys):
    rec = run_json(capsys, "resilience", "--weights", "1 1 1 1", "--signs", "++++", "--kmax", "1")
    assert rec["outputs"]["value"] == ">1"


def test_basis_and_construct(capsys):
    rec = run_json(capsys, "basis", "--order", "2", "--range", "9")
    assert rec["outputs"]["elements"] == [1, 2, 3, 4, 5, 6]
    assert rec["outputs"]["sum_of_squares"] == 91 and rec["outputs"]["verified"]
    rec = run_json(capsys, "construct", "--family", "powers2", "--n", "5")
    assert rec["outputs"]["weights"] == [1, 2, 4, 8, 16]


def test_profile_and_qk(capsys):
    rec = run_json(capsys, "profile", "--weights", "1 1", "--x", "0")
    assert rec["outputs"]["rows"] == [{"d": 0, "count": 2}, {"d": 1, "count": 2}]
    rec = run_json(capsys, "qk", "--weights", "1 1 1 1", "--k", "0")
    assert rec["outputs"]["value"] == "3/8"


def test_rationals_scale_the_target(capsys):
    rec = run_json(capsys, "resilience", "--weights", "1/2 1/2", "--signs", "++", "--x", "0")
    assert rec["outputs"]["value"] == "1"
    rec = run_json(capsys, "resilience", "--weights", "1/2 1/2", "--signs", "++", "--x", "1/3")
    assert rec["outputs"]["value"] == "inf"


def test_weights_files(tmp_path, capsys):
    plain = tmp_path / "w.txt"
    plain.write_text("# four ones\n1 1\n1 1\n")
    rec = run_json(capsys, "qk", "--weights-file", str(plain), "--k", "0")
    assert rec["outputs"]["value"] == "3/8"
    assert len(rec["inputs"]["weights_sha256"]) == 64
    doc = tmp_path / "w.json"
    doc.write_text(json.dumps({"name": "mine", "weights": [1, 2, 4]}))
    rec = run_json(capsys, "profile", "--weights-file", str(doc), "--x", "7")
    assert rec["outputs"]["rows"][0] == {"d": 0, "count": 1}


def test_parse_errors_name_the_line():
    with pytest.raises(UsageError, match=r"f:3"):
        parse_weights_text("1 2\n3\n4 x\n", "f")
    with pytest.raises(UsageError, match="nonzero"):
        parse_weights_text("1 0 2")
    with pytest.raises(UsageError):
        parse_weights_text("{bad json")


def test_exit_codes(tmp_path, capsys):
    assert main(["resilience", "--weights", "1 2", "--signs", "+++"]) == 2
    assert main(["resilience", "--weights", "1 z", "--signs", "++"]) == 2
    assert main(["estimate", "--weights", "1 1", "--k", "0"]) == 2
    assert main(["profile", "--weights", " ".join(["1"] * 30)]) == 3
    assert main(["construct", "--family", "layered", "--n", "10"]) == 4
    assert main(["resilience", "--weights-file", str(tmp_path / "none"), "--signs", "+"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["basis", "--order", "x"])
    assert exc.value.code == 2
    assert "error:" in capsys.readouterr().err


def test_thread_env(monkeypatch, capsys):
    monkeypatch.setenv(THREADS_ENV, "2")
    rec = run_json(capsys, "estimate", "--weights", "1 1 1 1", "--k", "0", "--samples", "1000",
                   "--seed", "1", "--no-timing")
    monkeypatch.setenv(THREADS_ENV, "1")
    again = run_json(capsys, "estimate", "--weights", "1 1 1 1", "--k", "0", "--samples", "1000",
                     "--seed", "1", "--no-timing")
    assert rec == again
    monkeypatch.setenv(THREADS_ENV, "lots")
    assert main(["basis", "--order", "1", "--range", "3"]) == 2


def test_replay_round_trip(tmp_path, capsys):
    path = tmp_path / "rec.json"
    assert main(["estimate", "--family", "ones", "--n", "40", "--k", "1", "--samples", "5000",
                 "--seed", "7", "--out", str(path)]) == 0
    assert main(["replay", str(path), "--threads", "2"]) == 0
    assert capsys.readouterr().out.strip() == "match"
    rec = json.loads(path.read_text())
    rec["outputs"]["hits"] += 1
    path.write_text(json.dumps(rec))
    assert main(["replay", str(path)]) == 1


def test_replay_of_a_sweep(tmp_path, capsys):
    path = tmp_path / "sweep.json"
    assert main(["sweep", "--family", "ones", "--k", "0", "--n-grid", "64:512:x2",
                 "--samples", "2000", "--seed", "3", "--out", str(path)]) == 0
    assert main(["replay", str(path)]) == 0


def test_csv_output(capsys):
    assert main(["profile", "--weights", "1 1", "--format", "csv"]) == 0
    assert capsys.readouterr().out.splitlines() == ["d,count", "0,2", "1,2"]
    assert main(["basis", "--order", "1", "--range", "3", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("elements,") and lines[1].startswith("1 2 3,")


def test_certify_single_and_batch(capsys):
    rec = run_json(capsys, "certify", "--weights", "1 1 1 1", "--signs", "++++")
    assert rec["outputs"]["ok"] and rec["outputs"]["size"] == 2
    rec = run_json(capsys, "certify", "--family", "ones", "--n", "12", "--samples", "20",
                   "--seed", "1")
    assert rec["outputs"]["samples"] == 20


def test_bestats(capsys):
    rec = run_json(capsys, "bestats", "--weights", "1")
    assert abs(rec["outputs"]["kolmogorov_distance"] - 0.3413) < 1e-4
    assert rec["outputs"]["max_atom"]["value_exact"] == "1/2"
    assert main(["bestats", "--weights", "1 1", "--mode", "monte_carlo", "--samples", "10"]) == 2
