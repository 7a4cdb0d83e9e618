"""Deterministic text serialization: JSON and CSV with 17 significant digits."""
from __future__ import annotations

import json
import math
from importlib import resources

MEASURE_CSV_COLUMNS = ("source", "n", "area_total", "A_union", "M")


def fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    return format(x, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," if indent else ", "
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return fmt_float(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(str(k)) + ": " + _encode(v, indent, level + 1) for k, v in obj.items()]
        return "{" + pad + (sep + pad if indent else sep).join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [_encode(v, indent, level + 1) for v in obj]
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(items) + "]"
        return "[" + pad + (sep + pad if indent else sep).join(items) + end + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return _encode(obj.item(), indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with floats printed as ``%.17g`` (round-trips bit-exactly)."""
    return _encode(obj, indent, 0)


def csv_row(values) -> str:
    out = []
    for v in values:
        if isinstance(v, float):
            out.append(fmt_float(v))
        else:
            s = str(v)
            if any(ch in s for ch in ',"\n'):
                s = '"' + s.replace('"', '""') + '"'
            out.append(s)
    return ",".join(out)


def measure_csv_row(source: str, report) -> str:
    return csv_row([source, report.n, report.area_total, report.A_union, report.M])


def load_schema(name: str) -> dict:
    """Load one of the JSON schemas shipped in ``mcshape/schemas``."""
    text = resources.files("mcshape").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)
