"""Deterministic CSV/JSON output with a schema version.

No timestamps or environment details are written, so identical inputs give
byte-identical files.
"""

import csv
import io
import json
import math

import numpy as np

SCHEMA = 1


def _plain(value):
    """Convert numpy scalars and non-finite floats to JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def dumps_json(obj):
    payload = {"schema": SCHEMA}
    payload.update(_plain(obj))
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def _cell(value):
    value = _plain(value)
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dumps_csv(rows, columns):
    """CSV text with a header row, ``.`` decimals and ``\\n`` line ends."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["schema"] + list(columns))
    for row in rows:
        writer.writerow([SCHEMA] + [_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def dumps_table(rows, columns, fmt, extra=None):
    if fmt == "csv":
        return dumps_csv(rows, columns)
    if fmt == "json":
        body = {"columns": list(columns), "rows": [{c: r.get(c) for c in columns} for r in rows]}
        if extra:
            body.update(extra)
        return dumps_json(body)
    raise ValueError(f"unknown output format {fmt!r}")


def load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
