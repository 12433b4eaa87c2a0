"""Deterministic file formats for the command-line surface.

Floats are serialized with 17 significant digits everywhere, which
round-trips doubles exactly and makes repeated runs byte-comparable.
"""
from __future__ import annotations

import csv
import math

import numpy as np

from .core import SeriesData

__all__ = [
    "format_float",
    "dumps_json",
    "write_json",
    "write_csv",
    "read_csv_table",
    "read_series_csv",
    "write_series_csv",
]


def format_float(x: float) -> str:
    if isinstance(x, float) and (math.isnan(x) or math.isinf(x)):
        raise ValueError("refusing to serialize a non-finite number")
    return format(float(x), ".17g")


def _json_fragments(obj, indent, level):
    pad = " " * (indent * level)
    pad_in = " " * (indent * (level + 1))
    if isinstance(obj, dict):
        if not obj:
            yield "{}"
            return
        yield "{\n"
        for i, (key, value) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise TypeError("JSON object keys must be strings")
            yield f'{pad_in}"{key}": '
            yield from _json_fragments(value, indent, level + 1)
            yield ",\n" if i < len(obj) - 1 else "\n"
        yield pad + "}"
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            yield "[]"
            return
        yield "[\n"
        for i, value in enumerate(items):
            yield pad_in
            yield from _json_fragments(value, indent, level + 1)
            yield ",\n" if i < len(items) - 1 else "\n"
        yield pad + "]"
    elif isinstance(obj, bool) or isinstance(obj, np.bool_):
        yield "true" if obj else "false"
    elif obj is None:
        yield "null"
    elif isinstance(obj, (int, np.integer)):
        yield str(int(obj))
    elif isinstance(obj, (float, np.floating)):
        yield format_float(float(obj))
    elif isinstance(obj, str):
        escaped = obj.replace("\\", "\\\\").replace('"', '\\"')
        yield f'"{escaped}"'
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj, indent: int = 2) -> str:
    """JSON text with controlled float formatting and stable key order."""
    return "".join(_json_fragments(obj, indent, 0)) + "\n"


def write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_json(obj))


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    return str(value)


def write_csv(path, header: list[str], rows):
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def read_csv_table(path):
    """Header plus raw string rows; malformed rows are reported by position."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV, a header row is required") from None
        rows = []
        for i, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}: row {i} has {len(row)} fields, "
                                 f"expected {len(header)}")
            rows.append(row)
    return header, rows


def read_series_csv(path, y_column: str = "y",
                    exog_columns: list[str] | None = None) -> SeriesData:
    """Load a data CSV into a series; every referenced cell must be a
    finite number (failures are reported with row and column)."""
    header, rows = read_csv_table(path)
    if y_column not in header:
        raise ValueError(f"{path}: missing required column {y_column!r}")
    exog_columns = exog_columns or []
    for name in exog_columns:
        if name not in header:
            raise ValueError(f"{path}: missing exogenous column {name!r}")

    def parse(row_idx, row, name):
        raw = row[header.index(name)]
        try:
            value = float(raw)
        except ValueError:
            raise ValueError(f"{path}: row {row_idx}, column {name!r}: "
                             f"not a number ({raw!r})") from None
        if not math.isfinite(value):
            raise ValueError(f"{path}: row {row_idx}, column {name!r}: "
                             "non-finite value")
        return value

    y = np.array([parse(i, row, y_column) for i, row in enumerate(rows, start=2)])
    exog = np.column_stack(
        [[parse(i, row, name) for i, row in enumerate(rows, start=2)]
         for name in exog_columns]) if exog_columns else None
    return SeriesData(y=y, exog=exog, exog_names=exog_columns or None)


def write_series_csv(path, data: SeriesData):
    names = data.exog_names or [f"x{j}" for j in range(data.exog.shape[1])]
    header = ["t", "y"] + list(names)
    rows = [[t, data.y[t]] + list(data.exog[t]) for t in range(data.n_obs)]
    write_csv(path, header, rows)
