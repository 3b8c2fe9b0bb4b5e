"""Command-line interface: exit codes, report shape, determinism."""

import json

import pytest

from hoint.cli import main

from conftest import CORPUS


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_typecheck_ok(capsys):
    code, out, _ = _run(capsys, "typecheck", CORPUS / "double.hot")
    assert code == 0
    rep = json.loads(out)
    assert rep["verdicts"]["type"] == "Nat -> Nat"


def test_typecheck_error_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.hot"
    bad.write_text("fun (x : Nat) -> y")
    code, _, err = _run(capsys, "typecheck", bad)
    assert code == 1
    assert "TypecheckError" in err


def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["no-such-command"])
    assert ei.value.code == 2
    capsys.readouterr()


def test_eval_reports_counters(capsys):
    code, out, _ = _run(capsys, "eval", CORPUS / "double.hot")
    assert code == 1               # a bare lambda is normal, not a value
    rep = json.loads(out)
    assert rep["verdicts"]["status"] == "normal"

    code, out, _ = _run(capsys, "eval", CORPUS / "fold_app.hot")
    assert code == 1
    assert json.loads(out)["verdicts"]["status"] == "normal"


def test_eval_omega_fuel_exhausted(capsys):
    code, out, _ = _run(capsys, "eval", CORPUS / "omega.hot", "--fuel", 10)
    assert code == 1
    rep = json.loads(out)
    assert rep["verdicts"]["status"] == "fuel-exhausted"
    assert rep["timing"]["steps"] == 10


def test_certify_double_green(capsys):
    code, out, _ = _run(capsys, "certify", CORPUS / "double.hot",
                        "--candidates", CORPUS / "double.json",
                        "--poly", "\\X:N. 6*X^2 + 5")
    assert code == 0
    rep = json.loads(out)
    assert rep["verdicts"]["verdict"] == "holds-on-grid"


def test_certify_identity_red_with_witness(tmp_path, capsys):
    cand = tmp_path / "cand.json"
    cand.write_text(json.dumps(
        {"candidates": [{"path": "", "poly": "\\X:N. X"}]}))
    code, out, _ = _run(capsys, "certify", CORPUS / "double.hot",
                        "--candidates", cand)
    assert code == 1
    rep = json.loads(out)
    assert rep["verdicts"]["verdict"] == "fail"
    assert rep["witnesses"]


def test_btlp_run(capsys):
    code, out, _ = _run(capsys, "btlp-run", CORPUS / "mult.btlp",
                        "--args", "[5, 6]")
    assert code == 0
    rep = json.loads(out)
    assert rep["result"] == 18
    assert rep["counters"]["assigns"] == 5


def test_flatten_emits(capsys):
    for emit in ("annotated", "flat", "local"):
        code, out, _ = _run(capsys, "flatten", CORPUS / "sumup.btlp",
                            "--emit", emit)
        assert code == 0
        assert "proc SumUp" in out


def test_pipeline_mult(capsys):
    code, out, _ = _run(capsys, "pipeline", CORPUS / "mult.btlp",
                        "--exhaustive", "0..3")
    assert code == 0
    rep = json.loads(out)
    assert rep["verdicts"]["verdict"] == "pass"
    assert rep["counters"]["comparisons"] == 16 * 5


def test_corpus_runner(capsys):
    code, out, _ = _run(capsys, "corpus", CORPUS)
    assert code == 0
    lines = [l for l in out.splitlines() if l.startswith(("PASS", "FAIL"))]
    assert len(lines) == 6
    assert all(l.startswith("PASS") for l in lines)


def test_reports_are_deterministic(capsys):
    args = ("certify", CORPUS / "map.hot",
            "--candidates", CORPUS / "map.json")
    _, out1, _ = _run(capsys, *args)
    _, out2, _ = _run(capsys, *args)
    assert out1 == out2
