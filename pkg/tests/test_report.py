import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whitlab import report
from whitlab.errors import DomainError, SchemaError
from whitlab.jets import JetField, Polynomial, jets_from_function
from whitlab.moduli import PowerLaw, Table, Zero
from whitlab.scalar_cex import build_c0_field
from whitlab.vector_cex import GapReport, desk_blocks, extension_gap_verdict, make_schedule


def test_round_trips_are_byte_identical():
    objs = [build_c0_field(3, 4), PowerLaw(1, 0.5), Table.from_pairs([(0.1, 0.2), (1.0, 0.5)]),
            desk_blocks(), make_schedule("c1om", [1, 2], omega=PowerLaw(1, 0.5))]
    for obj in objs:
        raw = report.dumps(obj)
        assert raw.endswith(b"\n")
        assert report.dumps(report.loads(raw)) == raw


def test_rejects_non_finite():
    with pytest.raises(DomainError):
        report.dumps(JetField.zero_jets(1, [[0.0]], [[math.inf]]))
    raw = b'{"schema":"whitlab/1","type":"modulus","data":{"kind":"linear","params":{"M":NaN}}}'
    with pytest.raises(SchemaError):
        report.loads(raw)


def test_rejects_unknown_schema_and_type():
    good = json.loads(report.dumps(PowerLaw(1, 0.5)))
    with pytest.raises(SchemaError, match="schema"):
        report.loads(json.dumps({**good, "schema": "whitlab/2"}))
    with pytest.raises(SchemaError):
        report.loads(json.dumps({**good, "type": "teapot"}))
    with pytest.raises(SchemaError):
        report.loads("[1, 2]")
    with pytest.raises(DomainError):
        report.dumps(object())


def test_malformed_json_location():
    with pytest.raises(SchemaError, match="line 2, column 5"):
        report.loads('{"schema":\n    oops}')


def test_load_path_missing(tmp_path):
    with pytest.raises(SchemaError):
        report.load_path(str(tmp_path / "absent.json"))


def test_csv_cells_and_header():
    assert report.emit_csv([], ["a", "b"]) == "a,b\n"
    out = report.emit_csv([{"a": 0.1, "b": True}, {"a": math.inf, "b": None}, {"a": np.float64(2.5)}], ["a", "b"])
    assert out == "a,b\n0.1,true\ninf,\n2.5,\n"
    assert report.format_cell(float("nan")) == "nan" and report.format_cell(-math.inf) == "-inf"


def test_json_report_and_unknown_format():
    body = json.loads(report.emit_json([{"x": math.nan, "y": 1}], ["x", "y"]))
    assert body["rows"] == [{"x": "nan", "y": 1}] and body["columns"] == ["x", "y"]
    with pytest.raises(DomainError):
        report.emit([], ["x"], "xml")


def test_gap_report_columns_in_csv():
    row = extension_gap_verdict(desk_blocks(1)[0], Zero(), Zero()).row()
    header = report.emit_csv([row], GapReport.COLUMNS).splitlines()[0]
    assert header.split(",") == list(GapReport.COLUMNS)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_jetfield_bits_survive(seed):
    rng = np.random.default_rng(seed)
    P = Polynomial.random(2, 3, rng, scale=10.0 ** rng.uniform(-8, 8))
    F = jets_from_function(P, rng.normal(size=(5, 2)) * 10.0 ** rng.integers(-6, 6), 2)
    G = report.loads(report.dumps(F))
    assert G.points.tobytes() == F.points.tobytes() and G.values.tobytes() == F.values.tobytes()
    assert all(a.tobytes() == b.tobytes() for a, b in zip(F.derivs, G.derivs))
