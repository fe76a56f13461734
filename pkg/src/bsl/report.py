"""Row formatting for experiment output: CSV with a ``#`` config header, or JSON.

Floats carry 17 significant digits so a value read back from a file is the
same double that was written.  Parsing an emitted CSV and writing it again
reproduces the original bytes.
"""
from __future__ import annotations

import csv
import io
import json
import math
import re
import sys
from pathlib import Path

_INT_RE = re.compile(r"^-?\d+$")


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def parse_value(s: str):
    """Inverse of :func:`format_value` up to int/float ambiguity of integral floats."""
    if s == "":
        return None
    if s == "true":
        return True
    if s == "false":
        return False
    if s == "-0":
        return -0.0  # only a float formats this way
    if _INT_RE.match(s):
        return int(s)
    try:
        return float(s)
    except ValueError:
        return s


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return format_value(v)
    return v


def to_csv(columns: list[str], rows: list[dict], meta: dict[str, str] | None = None) -> str:
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}={value}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def parse_csv(text: str) -> tuple[dict[str, str], list[str], list[dict]]:
    """Return (config header, column names, typed rows)."""
    meta: dict[str, str] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
        else:
            body.append(line)
    reader = csv.reader(body)
    try:
        columns = next(reader)
    except StopIteration:
        raise ValueError("CSV has no header row") from None
    rows = []
    for rec in reader:
        if len(rec) != len(columns):
            raise ValueError(f"row has {len(rec)} fields, header has {len(columns)}")
        rows.append({c: parse_value(x) for c, x in zip(columns, rec)})
    return meta, columns, rows


def to_json(columns: list[str], rows: list[dict]) -> str:
    out = [{c: _json_value(row.get(c)) for c in columns} for row in rows]
    return json.dumps(out, indent=2) + "\n"


def render(columns: list[str], rows: list[dict], fmt: str = "csv", meta: dict[str, str] | None = None) -> str:
    if fmt == "csv":
        return to_csv(columns, rows, meta)
    if fmt == "json":
        return to_json(columns, rows)
    raise ValueError(f"unknown format {fmt!r}; use csv or json")


def write_text(path: str | Path | None, text: str) -> None:
    """Write with LF endings; ``None`` or ``-`` means stdout."""
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    Path(path).write_text(text, encoding="utf-8", newline="\n")
