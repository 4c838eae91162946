"""CSV schema checks and atomic writes for experiment outputs."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path


class SchemaError(ValueError):
    pass


def validate_rows(columns, rows, monotone=(), group_by=None) -> None:
    """Check column names and that each ``monotone`` column never decreases
    (within each ``group_by`` group, in row order)."""
    for k, row in enumerate(rows):
        if list(row) != list(columns):
            raise SchemaError(f"row {k} has columns {list(row)}, expected {list(columns)}")
    for col in monotone:
        last: dict = {}
        for k, row in enumerate(rows):
            g = row[group_by] if group_by else None
            v = float(row[col])
            if v != v:
                raise SchemaError(f"column {col!r} is NaN at row {k}")
            if g in last and v < last[g]:
                raise SchemaError(f"column {col!r} decreases at row {k} (group {g!r})")
            last[g] = v


def rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def write_atomic(path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_csv(path, columns, rows, monotone=(), group_by=None) -> None:
    validate_rows(columns, rows, monotone, group_by)
    write_atomic(path, rows_to_csv(columns, rows))


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
