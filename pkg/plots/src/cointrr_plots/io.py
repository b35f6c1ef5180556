"""Reading the versioned results.csv files the experiment CLI writes.

A results file starts with a ``# schema=<version>`` comment line, then a
regular CSV header and rows. Only schema v1 is supported; anything else is a
:class:`SchemaMismatch` so stale files fail loudly instead of rendering
nonsense. All access is read-only.
"""

from __future__ import annotations

from pathlib import Path

import csv

from .errors import ParseError, SchemaMismatch

SUPPORTED_SCHEMA = "v1"


def read_table(path) -> tuple[list[str], list[list[str]]]:
    """Return (header, rows) of a schema-v1 results file."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            first = fh.readline().rstrip("\n")
            if not first.startswith("# schema="):
                raise ParseError(
                    f"{path}: first line must declare '# schema=...', got {first!r}"
                )
            version = first[len("# schema=") :]
            if version != SUPPORTED_SCHEMA:
                raise SchemaMismatch(
                    f"{path}: schema {version!r} is not supported "
                    f"(this package reads {SUPPORTED_SCHEMA!r})"
                )
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header:
                raise ParseError(f"{path}: missing CSV header after the schema line")
            rows = list(reader)
    except FileNotFoundError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    for line_no, row in enumerate(rows, start=3):
        if len(row) != len(header):
            raise ParseError(
                f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}"
            )
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return header, rows


def column_index(header: list[str], name: str, path) -> int:
    try:
        return header.index(name)
    except ValueError:
        raise ParseError(f"{path}: required column {name!r} not in {header}") from None


def cell_float(row: list[str], idx: int, line_no: int, header: list[str], path) -> float:
    try:
        return float(row[idx])
    except ValueError:
        raise ParseError(
            f"{path}:{line_no}: column {header[idx]!r} has non-numeric value {row[idx]!r}"
        ) from None


def cell_int(row: list[str], idx: int, line_no: int, header: list[str], path) -> int:
    try:
        return int(row[idx])
    except ValueError:
        raise ParseError(
            f"{path}:{line_no}: column {header[idx]!r} has non-integer value {row[idx]!r}"
        ) from None
