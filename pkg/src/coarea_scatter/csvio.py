"""CSV writing with lossless float formatting and optional comment metadata."""

from __future__ import annotations

import csv
import io
import os
from typing import Iterable, Mapping, Optional

import numpy as np


def fmt(value) -> str:
    """Shortest decimal that round-trips the binary value."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def render_csv(columns: list[str], rows: Iterable, metadata: Optional[Mapping] = None) -> str:
    buf = io.StringIO()
    if metadata:
        for k, v in metadata.items():
            buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, columns: list[str], rows: Iterable, metadata: Optional[Mapping] = None) -> str:
    text = render_csv(columns, rows, metadata)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return str(path)


def read_csv(path):
    """Return (metadata dict, header, rows of strings)."""
    meta, lines = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].partition(":")
                meta[k.strip()] = v.strip()
            else:
                lines.append(line)
    rows = list(csv.reader(lines))
    return meta, rows[0], rows[1:]
