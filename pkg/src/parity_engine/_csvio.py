"""Tiny helpers for the versioned CSV files the engine emits."""

import csv
import os

SCHEMA_PREFIX = "#schema="


def fmt(value):
    """Format a cell: shortest round-trip repr for floats, '' for None."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "item"):  # numpy scalar
        return fmt(value.item())
    return str(value)


def write_csv(path, schema, header, rows):
    """Write ``rows`` under a ``#schema=`` comment line and a header row."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"{SCHEMA_PREFIX}{schema}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_csv(path):
    """Return ``(schema or None, header, rows)``; rows are lists of strings."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        lines = fh.read().splitlines()
    schema = None
    if lines and lines[0].startswith(SCHEMA_PREFIX):
        schema = lines[0][len(SCHEMA_PREFIX):].strip()
        lines = lines[1:]
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        return schema, None, []
    return schema, header, [row for row in reader]
