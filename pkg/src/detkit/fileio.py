"""Atomic, byte-deterministic file emission shared by the CLI and harness.

Floats are serialized with repr (shortest round-trip form), JSON with
sorted keys, and every write goes through a temp file + rename so
partially written artifacts never appear.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt_cell(value) -> str:
    if isinstance(value, float):  # incl. numpy float64
        return repr(float(value))
    return str(value)


def csv_text(header: list[str], rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: list[str], rows: list) -> None:
    atomic_write_text(path, csv_text(header, rows))


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    atomic_write_text(path, json_text(obj))
