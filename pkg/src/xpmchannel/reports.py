"""Plain columnar text reports with a metadata header.

Layout::

    # key: value           (metadata, one per line, JSON-encoded values)
    col_a col_b col_c      (header row)
    1.5 2 nan              (data rows, whitespace separated)
"""
from __future__ import annotations

import json
import math
from pathlib import Path

__all__ = ["format_value", "write_table", "read_table"]


def format_value(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.17g}"
    return str(v)


def write_table(path, columns, rows, meta: dict | None = None) -> None:
    lines = [f"# {k}: {json.dumps(v, sort_keys=True)}" for k, v in (meta or {}).items()]
    lines.append(" ".join(columns))
    for row in rows:
        if len(row) != len(columns):
            raise ValueError("row length does not match the header")
        lines.append(" ".join(format_value(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse(token: str):
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        return token


def read_table(path):
    """Return ``(meta, columns, rows)``; numeric cells are parsed."""
    meta, columns, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = json.loads(value)
        elif columns is None:
            columns = line.split()
        elif line.strip():
            rows.append([_parse(t) for t in line.split()])
    return meta, columns, rows
