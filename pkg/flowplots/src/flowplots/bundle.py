"""Parsing of the gkflow CSV contracts.

Two shapes are consumed:

* monitoring time series (``series.csv``): a ``t`` column plus the
  documented residual columns; extras are allowed, missing mandatory
  columns abort with the column name.
* refinement tables (``refinement.csv``): ``operator, resolution, error``.

Numbers are kept both as parsed floats and as the raw CSV strings so the
summary table can echo terminal rows without reformatting.
"""

from __future__ import annotations

import csv
import os

MANDATORY_SERIES_COLUMNS = [
    "t", "norm_Rc", "norm_H", "norm_dH", "norm_Np", "norm_Nm",
    "r1", "r2", "r3", "compat_p", "compat_m", "min_eig_g",
    "norm_Xp", "norm_Xm",
]

REFINEMENT_COLUMNS = ["operator", "resolution", "error"]


class SeriesBundle:
    """Columns of one monitoring CSV, keyed by name."""

    def __init__(self, path, columns, raw_rows, meta=None):
        self.path = path
        self.columns = columns          # name -> list[float]
        self.raw_rows = raw_rows        # list[dict[str, str]]
        self.meta = meta or {}

    @property
    def names(self):
        return list(self.columns)

    @property
    def scenario(self):
        return self.meta.get("scenario", os.path.basename(os.path.dirname(self.path)))

    def terminal_row(self):
        return self.raw_rows[-1]

    def __len__(self):
        return len(self.raw_rows)


def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValueError("%s: empty CSV" % path)
        rows = [row for row in reader if row]
    return header, rows


def load_series(path, report_path=None):
    header, rows = _read_rows(path)
    missing = [c for c in MANDATORY_SERIES_COLUMNS if c not in header]
    if missing:
        raise ValueError("%s: missing mandatory column %r" % (path, missing[0]))
    columns = {name: [] for name in header}
    raw_rows = []
    for row in rows:
        if len(row) != len(header):
            raise ValueError("%s: ragged row %r" % (path, row))
        raw = dict(zip(header, row))
        raw_rows.append(raw)
        for name, cell in raw.items():
            columns[name].append(float(cell))
    meta = {}
    if report_path is None:
        candidate = os.path.join(os.path.dirname(path), "report.txt")
        report_path = candidate if os.path.exists(candidate) else None
    if report_path:
        with open(report_path) as fh:
            for line in fh:
                if ":" in line:
                    key, _, value = line.partition(":")
                    if key.strip() in ("scenario", "result", "expect_fail"):
                        meta[key.strip()] = value.strip()
    return SeriesBundle(path, columns, raw_rows, meta)


def load_refinement(path):
    header, rows = _read_rows(path)
    missing = [c for c in REFINEMENT_COLUMNS if c not in header]
    if missing:
        raise ValueError("%s: missing mandatory column %r" % (path, missing[0]))
    table = {}
    for row in rows:
        raw = dict(zip(header, row))
        op = raw["operator"]
        table.setdefault(op, []).append(
            (float(raw["resolution"]), float(raw["error"]))
        )
    for op in table:
        table[op].sort()
    return table


def classify(path):
    """Sniff which contract a CSV follows."""
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
    if set(REFINEMENT_COLUMNS) <= set(header):
        return "refinement"
    return "series"
