import json

import pytest

from conftest import SYSTEMS
from diffiety import report
from diffiety.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr().out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv, "--format", "json")
    return code, json.loads(out)


PDE = SYSTEMS / "single_pde.dsl"
NONCONTROLLABLE = SYSTEMS / "noncontrollable.dsl"


def test_hilbert(capsys):
    code, doc = run_json(capsys, "hilbert", PDE, "--order", "4")
    assert code == 0 and doc["schema"] == 1
    fit = doc["filtration"]["hilbert"]
    assert (fit["nu"], fit["mu"]) == (1, 1)
    assert doc["filtration"]["dims"] == [2, 5, 9, 14, 20]


def test_residual_zero_message(capsys):
    code, out = run(capsys, "residual", PDE, "--k", "0", "--order", "4")
    assert code == 0 and "no first integrals" in out and "R^0: rank 0" in out


def test_analyze_noncontrollable(capsys):
    code, doc = run_json(capsys, "analyze", NONCONTROLLABLE, "--order", "4")
    assert code == 0
    (entry,) = doc["series"]["entries"]
    assert entry["k"] == 1 and entry["hilbert"]["c"]["1"] == 1
    assert doc["obstructions"]["values"] == {"A": "0", "B": "0"}
    red = doc["reductions"]["1"]
    assert {e["lhs"]: e["rhs"] for e in red["equations"]} == {
        "dv/du": "f", "dv/dx": "H(f)", "dv/dy": "G(y, x*H(f) + u*f - v)"}
    assert doc["generic_only"] and "f" in doc["assumptions"]


def test_strict_exit_status(capsys):
    assert run(capsys, "analyze", NONCONTROLLABLE, "--order", "4", "--strict")[0] == 4
    assert run(capsys, "hilbert", PDE, "--order", "3", "--strict")[0] == 0


def test_parse_error_exit(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("independent x\ndependent u\nu_x = q(x)\n", encoding="utf-8")
    code, doc = run_json(capsys, "hilbert", bad)
    assert code == 2 and doc["error"] == {"code": "undeclared_symbol", "line": 3, "col": 7,
                                          "message": "undeclared function 'q'"}
    assert run(capsys, "hilbert", tmp_path / "missing.dsl")[0] == 2


def test_analysis_error_exit(capsys, tmp_path):
    free = tmp_path / "free.dsl"
    free.write_text("independent x\ndependent w\n", encoding="utf-8")
    code, doc = run_json(capsys, "obstructions", free, "--order", "2")
    assert code == 3 and doc["error"]["code"] == "shape_mismatch"


def test_reduce_requires_k(capsys):
    with pytest.raises(SystemExit) as info:
        main(["reduce", str(PDE)])
    assert info.value.code == 2


def test_reduce_and_cauchy(capsys):
    code, doc = run_json(capsys, "reduce", SYSTEMS / "ode_pair_decoupled.dsl", "--k", "0", "--order", "3")
    assert code == 0 and [h["name"] for h in doc["reductions"]["0"]["hull"]] == ["x", "u", "v"]
    code, doc = run_json(capsys, "cauchy", SYSTEMS / "ode_pair_decoupled.dsl", "--order", "3")
    assert code == 0 and [z["text"] for z in doc["cauchy"]["0"]] == ["d/dx + F*d/du + G*d/dv"]


def test_probabilistic_zero_test_agrees(capsys):
    _, a = run_json(capsys, "hilbert", PDE, "--order", "3")
    _, b = run_json(capsys, "hilbert", PDE, "--order", "3", "--zero-test", "probabilistic", "--seed", "9")
    assert a["filtration"] == b["filtration"]


def test_timings_only_on_request(capsys):
    _, doc = run_json(capsys, "hilbert", PDE, "--order", "3")
    assert "timings" not in doc
    _, doc = run_json(capsys, "hilbert", PDE, "--order", "3", "--timings")
    assert set(doc["timings"]) == {"filtration"}


def test_report_round_trip(capsys):
    _, out = run(capsys, "analyze", SYSTEMS / "ode_pair_rank1.dsl", "--order", "3", "--format", "json")
    doc = report.loads(out)
    assert report.dumps(doc) == out
    assert report.loads(report.dumps(doc)) == doc
    with pytest.raises(ValueError):
        report.loads('{"schema": 2}')


def test_text_output_mentions_assumptions(capsys):
    _, out = run(capsys, "analyze", SYSTEMS / "ode_pair_rank1.dsl", "--order", "3")
    assert "assumptions: w_x != 0; w_xx != 0" in out
    assert "composition series: R^0 < Omega" in out
