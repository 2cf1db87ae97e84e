"""Serialisation of result objects to JSON lines and CSV.

Structured text is one JSON object per line: a ``header`` object echoing
the run configuration, then one object per report with a ``kind`` key.
Exact rationals are written as ``"p/q"`` strings, mpmath numbers as
decimal strings with ``REPORT_DIGITS`` significant digits, and integers
beyond 2^53 as decimal strings so that no JSON reader rounds them.

CSV tables use the dataclass field order of the report as column order;
fields holding sequences are expanded into one row per element by the
layouts in ``CSV_LAYOUTS``.  Lines starting with ``#`` carry the header.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
from fractions import Fraction

import mpmath

REPORT_DIGITS = 30
_SAFE_INT = 1 << 53


def to_jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return int(obj) if abs(obj) < _SAFE_INT else str(int(obj))
    if isinstance(obj, float):
        return obj
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, mpmath.mpf):
        return mpmath.nstr(obj, REPORT_DIGITS, min_fixed=-6, max_fixed=12)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def kind_of(obj) -> str:
    return type(obj).__name__


def json_line(obj, kind: str | None = None) -> str:
    payload = to_jsonable(obj)
    if isinstance(payload, dict):
        payload = {"kind": kind or kind_of(obj), **payload}
    return json.dumps(payload, separators=(",", ":"), ensure_ascii=False)


def render_text(header: dict, reports) -> str:
    lines = [json.dumps({"kind": "header", **to_jsonable(header)}, separators=(",", ":"))]
    lines += [json_line(r) if dataclasses.is_dataclass(r) else json.dumps(to_jsonable(r), separators=(",", ":")) for r in reports]
    return "\n".join(lines) + "\n"


# report kind -> (index column name, sequence fields expanded row-wise)
CSV_LAYOUTS = {
    "BallsCupsReport": ("trial", ("max_relative_deviation", "min_relative_deviation")),
    "ExpectationReport": ("term", ("partial_sums",)),
}


def _cell(v):
    v = to_jsonable(v)
    return json.dumps(v, separators=(",", ":")) if isinstance(v, (list, dict)) else ("" if v is None else v)


def csv_rows(report) -> tuple[list[str], list[list]]:
    d = report if isinstance(report, dict) else {f.name: getattr(report, f.name) for f in dataclasses.fields(report)}
    layout = CSV_LAYOUTS.get(kind_of(report))
    if layout is None:
        return list(d), [[_cell(v) for v in d.values()]]
    index, seqs = layout
    scalars = [k for k in d if k not in seqs]
    header = scalars + [index, *seqs]
    base = [_cell(d[k]) for k in scalars]
    length = max((len(d[s]) for s in seqs), default=0)
    rows = [base + [i] + [_cell(d[s][i]) for s in seqs] for i in range(length)]
    return header, rows


def render_csv(header: dict, reports) -> str:
    buf = io.StringIO()
    for key, value in to_jsonable(header).items():
        buf.write(f"# {key}={json.dumps(value, separators=(',', ':'))}\n")
    writer = csv.writer(buf, lineterminator="\n")
    last = None
    for r in reports:
        cols, rows = csv_rows(r)
        if cols != last:
            writer.writerow(cols)
            last = cols
        writer.writerows(rows)
    return buf.getvalue()
