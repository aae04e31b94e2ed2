"""Deterministic CSV emission and parsing for run artifacts.

Floats are written with repr (shortest round-trip form) so identical
runs produce identical bytes.  Header metadata lives in leading
'# key = value' comment lines; the column header row follows.
"""

from __future__ import annotations

import numpy as np

__all__ = ["write_csv", "read_csv"]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, columns, rows, meta: dict | None = None) -> None:
    with open(path, "w") as fh:
        for key, val in (meta or {}).items():
            fh.write(f"# {key} = {_fmt(val)}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    """Parse a file written by write_csv; values stay as strings."""
    meta: dict = {}
    columns: list[str] = []
    rows: list[list[str]] = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    meta[k.strip()] = v.strip()
                continue
            if not columns:
                columns = line.split(",")
                continue
            rows.append(line.split(","))
    return meta, columns, rows
