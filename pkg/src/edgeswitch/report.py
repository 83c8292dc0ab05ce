"""CSV writing and reading for every table the package emits."""
from __future__ import annotations

import csv
import io
import os


def _parse(value: str):
    if value == "":
        return None
    for conv in (int, float):
        try:
            return conv(value)
        except ValueError:
            pass
    return value


def format_rows(rows, fields=None) -> str:
    rows = list(rows)
    fields = list(fields or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})
    return buf.getvalue()


def write_rows(path: str | os.PathLike, rows, fields=None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_rows(rows, fields))


def read_rows(path: str | os.PathLike) -> list[dict]:
    """Rows of a CSV file with numeric cells converted to int or float."""
    with open(path, newline="") as fh:
        return [{k: _parse(v) for k, v in row.items()} for row in csv.DictReader(fh)]
