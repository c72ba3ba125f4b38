import csv
import io
import json
import subprocess
import sys

import pytest

from whitlab import report
from whitlab.cli import main, parse_index_list, parse_modulus
from whitlab.errors import DomainError
from whitlab.moduli import Capped, Linear, PowerLaw, Table, Zero
from whitlab.scalar_cex import build_c0_field


@pytest.fixture
def c0_path(tmp_path):
    p = tmp_path / "c0.json"
    p.write_bytes(report.dumps(build_c0_field(4, 6)))
    return str(p)


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_parse_modulus_forms():
    assert parse_modulus("zero") == Zero()
    assert parse_modulus("linear:16") == Linear(16.0)
    assert parse_modulus("power:1,0.5") == PowerLaw(1.0, 0.5)
    assert parse_modulus("capped:2,3") == Capped(2.0, 3.0)
    tab = parse_modulus("table:1=0.5,0.1=0.2")
    assert isinstance(tab, Table) and tab.interp == "linear" and tab(0.1) == 0.2
    assert parse_modulus("step:0.5=1").interp == "step"
    assert parse_modulus('{"kind": "linear", "params": {"M": 2.0}}') == Linear(2.0)
    for bad in ("linear", "power:1", "linear:inf", "sinus:1", '{"kind": NaN}', "table:a=b"):
        with pytest.raises(DomainError):
            parse_modulus(bad)


def test_parse_index_list():
    assert parse_index_list("1-3,7") == [1, 2, 3, 7]
    assert parse_index_list("5") == [5]
    for bad in ("0", "a-b", ""):
        with pytest.raises(DomainError):
            parse_index_list(bad)


def test_jetcheck_pass(c0_path, capsys):
    assert main(["jetcheck", c0_path, "--modulus", "linear:16"]) == 0
    (row,) = _rows(capsys.readouterr().out)
    assert row["passed"] == "true"


def test_jetcheck_fail_prints_witness(c0_path, capsys):
    assert main(["jetcheck", c0_path, "--modulus", "linear:0.1"]) == 2
    cap = capsys.readouterr()
    assert _rows(cap.out)[0]["passed"] == "false"
    assert cap.err.startswith("FAIL: witness pair")


def test_jetcheck_writes_every_report(c0_path, tmp_path, capsys):
    out = tmp_path / "reports"
    assert main(["jetcheck", c0_path, "--modulus", "linear:16", "--out", str(out), "--emit", "json"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["jetcheck.json", "jetcheck_minimal.json"]
    assert capsys.readouterr().out == ""


def test_schedule_c1om_zero(capsys):
    assert main(["schedule", "--kind", "c1om", "--omega", "zero"]) == 0
    (row,) = _rows(capsys.readouterr().out)
    assert row["k_n"] == "1" and row["holds"] == "true"


def test_schedule_search_exhausted(capsys):
    code = main(["schedule", "--kind", "c1om", "--omega", "power:2,0.3", "--ns", "2", "--max-k-bits", "40"])
    assert code == 2
    assert "largest tested k" in capsys.readouterr().err


def test_wells_inapplicable_exits_zero(capsys):
    assert main(["wells", "--modulus", "linear:1e9", "--max-m", "1024"]) == 0
    assert _rows(capsys.readouterr().out)[0]["applicable"] == "false"


def test_bundle_and_absgap(capsys):
    assert main(["bundle", "--gammas", "0.5,1,2", "--radius", "2", "--samples", "200"]) == 0
    capsys.readouterr()
    assert main(["absgap", "--count", "10", "--family", "affine"]) == 0
    assert len(_rows(capsys.readouterr().out)) == 10


def test_input_errors_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": "whitlab/1",\n "type": }')
    assert main(["jetcheck", str(bad), "--modulus", "zero"]) == 1
    assert "line 2" in capsys.readouterr().err
    other = tmp_path / "other.json"
    other.write_text(json.dumps({"schema": "whitlab/9", "type": "modulus", "data": {}}))
    assert main(["jetcheck", str(other), "--modulus", "zero"]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["schedule"]) == 1
    assert main(["jetcheck", str(bad), "--modulus", "cubic"]) == 1


def test_bad_thread_count(monkeypatch, capsys):
    monkeypatch.setenv("WHITLAB_THREADS", "many")
    assert main(["schedule", "--kind", "c1om", "--omega", "zero"]) == 1
    assert "WHITLAB_THREADS" in capsys.readouterr().err


def test_module_entry_point(c0_path):
    proc = subprocess.run([sys.executable, "-m", "whitlab", "jetcheck", c0_path, "--modulus", "linear:16"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0 and proc.stdout.startswith("condition,")
