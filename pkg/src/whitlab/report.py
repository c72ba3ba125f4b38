"""Schema-versioned serialization and deterministic CSV/JSON report emission."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable, Sequence

from .errors import DomainError, SchemaError
from .jets import JetField
from .moduli import Modulus, modulus_from_dict
from .vector_cex import BlockSpec

__all__ = [
    "SCHEMA",
    "dumps",
    "loads",
    "load_path",
    "emit_csv",
    "emit_json",
    "emit",
    "format_cell",
]

SCHEMA = "whitlab/1"


def _reject_constant(name: str):
    raise SchemaError(f"non-finite number {name} in input")


def _encode(obj: Any) -> tuple[str, Any]:
    if isinstance(obj, JetField):
        return "jetfield", obj.to_dict()
    if isinstance(obj, BlockSpec):
        return "blockspecs", [obj.to_dict()]
    if isinstance(obj, Modulus):
        return "modulus", obj.to_dict()
    if isinstance(obj, (list, tuple)) and obj and all(isinstance(s, BlockSpec) for s in obj):
        return "blockspecs", [s.to_dict() for s in obj]
    raise DomainError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> bytes:
    """Serialize a JetField, a Modulus or a BlockSpec sequence.

    Floats are written with Python's shortest round-trip repr, so parsing the
    output restores every finite double bit-for-bit.  Non-finite values are refused.
    """
    kind, data = _encode(obj)
    try:
        text = json.dumps({"schema": SCHEMA, "type": kind, "data": data}, allow_nan=False,
                          separators=(",", ":"))
    except ValueError as exc:
        raise DomainError(f"refusing to serialize non-finite data: {exc}") from None
    return (text + "\n").encode()


def loads(raw: bytes | str) -> Any:
    """Inverse of :func:`dumps`; malformed JSON raises SchemaError with line and column."""
    if isinstance(raw, bytes):
        raw = raw.decode()
    try:
        obj = json.loads(raw, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(obj, dict) or "schema" not in obj:
        raise SchemaError("missing schema envelope")
    if obj["schema"] != SCHEMA:
        raise SchemaError(f"unknown schema version {obj['schema']!r}")
    kind, data = obj.get("type"), obj.get("data")
    try:
        if kind == "jetfield":
            return JetField.from_dict(data)
        if kind == "modulus":
            return modulus_from_dict(data)
        if kind == "blockspecs":
            return [BlockSpec.from_dict(d) for d in data]
    except SchemaError:
        raise
    except (DomainError, KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"invalid {kind} payload: {exc}") from None
    raise SchemaError(f"unknown payload type {kind!r}")


def load_path(path: str) -> Any:
    try:
        with open(path, "rb") as fh:
            return loads(fh.read())
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror}") from None


def format_cell(v: Any) -> str:
    """Stable text for one CSV cell: shortest round-trip floats, lower-case booleans."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _json_cell(v: Any) -> Any:
    if isinstance(v, float) and not math.isfinite(v):
        return format_cell(v)
    if hasattr(v, "item"):  # numpy scalar
        return _json_cell(v.item())
    return v


def emit_csv(rows: Iterable[dict], columns: Sequence[str]) -> str:
    """CSV with the given column order; an empty row set yields the header alone."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_cell(_json_cell(r.get(c))) for c in columns])
    return buf.getvalue()


def emit_json(rows: Iterable[dict], columns: Sequence[str]) -> str:
    body = {"schema": SCHEMA, "type": "report", "columns": list(columns),
            "rows": [{c: _json_cell(r.get(c)) for c in columns} for r in rows]}
    return json.dumps(body, allow_nan=False, indent=1) + "\n"


def emit(rows: Iterable[dict], columns: Sequence[str], fmt: str = "csv") -> str:
    if fmt == "csv":
        return emit_csv(rows, columns)
    if fmt == "json":
        return emit_json(rows, columns)
    raise DomainError(f"unknown report format {fmt!r}")
