"""JSON and CSV emission with exact rationals and deterministic layout."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError


def to_jsonable(obj):
    """Recursively convert to JSON types; rationals become ``"p/q"`` strings.

    Non-finite floats become the strings ``"inf"``, ``"-inf"`` and ``"nan"``
    so the output stays strict JSON.
    """
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_jsonable(obj.to_dict())
        return to_jsonable(dataclasses.asdict(obj))
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if obj is None or isinstance(obj, str):
        return obj
    raise InputError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(obj, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(dumps(obj))
    return p


def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if v is None:
        return ""
    return str(v)


def csv_text(rows: Iterable[dict], columns: Sequence[str]) -> str:
    """RFC 4180 text with a header row; every row must carry exactly ``columns``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for i, row in enumerate(rows):
        if set(row) != set(columns):
            raise InputError(f"row {i} has columns {sorted(row)}, expected {list(columns)}")
        w.writerow([format_cell(row[c]) for c in columns])
    return buf.getvalue()


def emit_sweep(rows: Iterable[dict], path: str | Path, columns: Sequence[str] | None = None) -> Path:
    """Write a sweep table; with no rows the file holds only the header."""
    rows = list(rows)
    if columns is None:
        if not rows:
            raise InputError("an empty table needs explicit columns")
        columns = list(rows[0])
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="") as fh:
        fh.write(csv_text(rows, columns))
    return p


QUANTIZED_DING_COLUMNS = ("seed", "k", "tau", "gamma", "lhs", "rhs", "stderr", "margin")
SCAN_COLUMNS = ("gamma", "mean", "stderr", "max_share", "diverged")
FUNCTIONAL_COLUMNS = ("seed", "J", "E", "Ent", "M", "D", "margin")
