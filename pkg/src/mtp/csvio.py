"""Versioned CSV files.

Every file starts with a marker row ``#mtp-csv``, ``version=1``,
``kind=<kind>`` followed by the column header. Floats are written with
``repr`` so re-runs are byte-identical and values round-trip exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Any, Iterable, Sequence

SCHEMA_VERSION = 1
MARKER = "#mtp-csv"


class SchemaError(ValueError):
    pass


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "item"):  # numpy scalar
        return _fmt(value.item())
    return str(value)


def write_csv(path: str | Path, kind: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([MARKER, f"version={SCHEMA_VERSION}", f"kind={kind}"])
        writer.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
            writer.writerow([_fmt(v) for v in row])
    return path


def read_csv(path: str | Path, kind: str | None = None) -> tuple[str, list[dict[str, str]]]:
    """Return ``(kind, rows)``; rejects files without the marker or with another version."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        marker = next(reader, None)
        if not marker or marker[0] != MARKER:
            raise SchemaError(f"{path}: missing {MARKER} header row")
        meta = dict(item.split("=", 1) for item in marker[1:] if "=" in item)
        if meta.get("version") != str(SCHEMA_VERSION):
            raise SchemaError(f"{path}: unsupported schema version {meta.get('version')!r}")
        found = meta.get("kind", "")
        if kind is not None and found != kind:
            raise SchemaError(f"{path}: expected kind {kind!r}, found {found!r}")
        header = next(reader)
        return found, [dict(zip(header, row)) for row in reader]
