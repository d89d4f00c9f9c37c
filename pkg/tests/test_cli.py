import json
import math

import pytest

from lopa.cli import main, run
from lopa.report import strip_timestamp

TS = "2000-01-01T00:00:00+00:00"


def code_of(*argv):
    return run(list(argv), timestamp=TS)[0]


@pytest.mark.parametrize("argv,code", [
    (["validate", "@wave-1d"], 0),
    (["validate", "@jordan-block"], 1),
    (["symmetrizer", "@wave-1d"], 0),
    (["symmetrizer", "@jordan-block"], 1),
    (["dissipative-bc", "@wave-1d:dissipative"], 0),
    (["dissipative-bc", "@wave-1d:bad"], 1),
    (["lopatinski", "@wave-1d:good", "--resolution", "6"], 0),
    (["lopatinski", "@wave-1d:bad", "--resolution", "6"], 1),
    (["adjoint", "@acoustics-2d:good", "--scan", "--resolution", "5"], 0),
    (["solve", "@wave-1d:good", "--tau", "0.5", "--g", "[1]"], 0),
    (["solve", "@wave-1d:bad", "--g", "[1]"], 1),
    (["kreiss", "@wave-1d:good", "--n-gamma", "3", "--trials", "3"], 0),
    (["kreiss", "@wave-1d:bad", "--n-gamma", "3", "--trials", "3"], 1),
    (["decompose", "@acoustics-2d:good", "--eta", "0.3", "--g", "[1, 0.5]",
      "--f", '[{"v": [1, 0, 0], "mu": -1.0, "m": 0}]'], 0),
    (["viscous-evans", "@scalar-viscous:good"], 0),
    (["viscous-kreiss", "@scalar-viscous:good", "--trials", "3"], 0),
    (["catalog"], 0),
    (["catalog", "wave-1d", "--boundary", "bad"], 0),
])
def test_exit_codes(argv, code, capsys):
    assert code_of(*argv) == code


@pytest.mark.parametrize("argv", [
    ["validate", "missing.json"],
    ["lopatinski", "@no-such-entry"],
    ["lopatinski", "@wave-1d"],
    ["solve", "@wave-1d:good", "--gamma", "-1"],
    ["solve", "@wave-1d:good", "--eta", "1"],
    ["kreiss", "@wave-1d:good", "--resolution", "1"],
    ["viscous-kreiss", "@scalar-viscous:good", "--weights", '{"u": 0}'],
    ["viscous-evans", "@wave-1d:good"],
    ["catalog", "random-symmetrizable", "--param", "n=zero"],
    ["no-such-command"],
])
def test_invalid_input(argv, capsys):
    assert code_of(*argv) == 2


def test_bad_json_file(tmp_path, capsys):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    assert code_of("validate", str(p)) == 2


def test_json_output_and_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    code = main(["lopatinski", "@wave-1d:good", "--resolution", "5", "--json",
                 "--output", str(out)])
    assert code == 0
    printed = json.loads(capsys.readouterr().out)
    saved = json.loads(out.read_text())
    assert printed == saved
    assert set(printed) == {"tool", "version", "subcommand", "config", "verdict", "checks",
                            "result", "timestamp"}
    assert printed["verdict"] == "holds"
    assert abs(printed["result"]["inf_sigma"] - 1 / math.sqrt(2)) <= 1e-9


def test_text_output(capsys):
    assert main(["lopatinski", "@wave-1d:bad", "--resolution", "4"]) == 1
    assert "fails" in capsys.readouterr().out


def test_document_file_round_trip(tmp_path, capsys):
    _, rep = run(["catalog", "acoustics-2d", "--boundary", "good"], timestamp=TS)
    p = tmp_path / "doc.json"
    p.write_text(json.dumps(rep["result"]["document"]))
    assert code_of("lopatinski", str(p), "--resolution", "5") == 0


def test_decompose_lists_chain(capsys):
    _, rep = run(["decompose", "@wave-1d:good", "--g", "[1]", "--json"], timestamp=TS)
    names = list(rep["checks"])
    assert "trace estimate" in names and "direct vs decomposed" in names
    assert all(v == "pass" for v in rep["checks"].values())


@pytest.mark.parametrize("argv", [
    ["kreiss", "@acoustics-2d:good", "--n-gamma", "3", "--trials", "4", "--seed", "5"],
    ["viscous-kreiss", "@scalar-viscous:good", "--trials", "4", "--seed", "3"],
    ["dissipative-bc", "@random-symmetrizable:good,seed=4"],
])
def test_deterministic(argv, capsys):
    _, a = run(argv)
    _, b = run(argv + ["--workers", "2"])
    b["config"]["workers"] = a["config"]["workers"]
    assert json.dumps(strip_timestamp(a), sort_keys=True) == \
        json.dumps(strip_timestamp(b), sort_keys=True)
