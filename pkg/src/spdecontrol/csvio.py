"""CSV emission with a fixed float format so reruns are byte-identical."""

from __future__ import annotations

import csv
import math
import os


def format_value(v) -> str:
    """Floats with 9 significant digits; everything else via str()."""
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return "%.9g" % v
    return str(v)


def write_csv(path, header, rows) -> None:
    """Write UTF-8 comma-separated rows under a header with fixed column order."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
