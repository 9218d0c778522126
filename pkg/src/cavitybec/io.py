"""Deterministic CSV / JSON writers shared by all export functions.

Floats are written with 17 significant digits in scientific notation so
that a value read back with ``float()`` is bit-identical to the one written.
Every file starts with ``#`` comment lines holding the resolved parameter
set and the column list.
"""

from __future__ import annotations

import io
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = ["format_value", "header_lines", "write_csv", "write_json", "read_csv"]


def format_value(value) -> str:
    """Format a scalar for CSV output."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.16e}"
    if value is None:
        return ""
    return str(value)


def header_lines(params: Mapping | None, comments: Iterable[str]) -> list[str]:
    """``# params: k=v ...`` line followed by one ``# ...`` line per comment."""
    lines = []
    if params:
        resolved = " ".join(f"{k}={format_value(v)}" for k, v in params.items())
        lines.append(f"# params: {resolved}")
    lines.extend(f"# {c}" for c in comments)
    return lines


def write_csv(target, columns: Sequence[str], rows: Iterable[Sequence],
              params: Mapping | None = None, comments: Iterable[str] = ()):
    """Write rows to ``target`` (a path or a text stream).

    Parameters
    ----------
    target : path-like or file object
        Destination.
    columns : sequence of str
        Column names, documented in a ``# columns:`` header line.
    rows : iterable of sequences
        Row values; each is formatted with :func:`format_value`.
    params : mapping, optional
        Resolved parameter set written as ``# params:`` header.
    comments : iterable of str
        Extra header comment lines.
    """
    buf = io.StringIO()
    for line in header_lines(params, comments):
        buf.write(line + "\n")
    buf.write(f"# columns: {','.join(columns)}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
        buf.write(",".join(format_value(v) for v in row) + "\n")
    text = buf.getvalue()
    if hasattr(target, "write"):
        target.write(text)
    else:
        Path(target).write_text(text)
    return text


def _jsonable(value):
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def write_json(target, columns: Sequence[str], rows: Iterable[Sequence],
               params: Mapping | None = None, comments: Iterable[str] = ()):
    """JSON counterpart of :func:`write_csv` (records oriented)."""
    payload = {
        "params": {k: _jsonable(v) for k, v in (params or {}).items()},
        "comments": list(comments),
        "columns": list(columns),
        "rows": [{c: _jsonable(v) for c, v in zip(columns, row)} for row in rows],
    }
    text = json.dumps(payload, indent=1, sort_keys=False) + "\n"
    if hasattr(target, "write"):
        target.write(text)
    else:
        Path(target).write_text(text)
    return text


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Read back a file written by :func:`write_csv` (header comments skipped)."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    columns = lines[0].split(",")
    return columns, [ln.split(",") for ln in lines[1:]]
