"""JSON/CSV output helpers shared by the library and the CLI."""
from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable

import numpy as np

ROW_SCHEMA = "bm-rows/1"


def to_json_safe(obj: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats for JSON output."""
    if isinstance(obj, dict):
        return {str(k): to_json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_json_safe(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_json(payload: Any) -> str:
    return json.dumps(to_json_safe(payload), indent=2, sort_keys=False)


def rows_to_csv(rows: Iterable[dict]) -> str:
    """CSV text with the union of keys as header, in first-seen order."""
    rows = [to_json_safe(r) for r in rows]
    header: list[str] = []
    for r in rows:
        header += [k for k in r if k not in header]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _cell(v) for k, v in r.items()})
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (dict, list)):
        return json.dumps(v)
    if isinstance(v, float):
        return repr(v)
    return v


def render(rows: list[dict], fmt: str, config: dict | None = None) -> str:
    if fmt == "csv":
        return rows_to_csv(rows)
    if fmt == "json":
        return dumps_json({"schema": ROW_SCHEMA, "config": config, "rows": rows}) + "\n"
    raise ValueError(f"unknown output format {fmt!r}")
