"""Click-table CSV files.

Arrival table rows are ``i,j,value``; superposition rows are
``a,b,i,j,phiA,phiB,value``. Both files start with a header line. Values may
be raw counts or probabilities: the arrival table is normalised to unit sum,
and each superposition setting ``(i, j, phiA, phiB)`` is normalised so its
four outcomes add up to the arrival mass of the four cells it involves.
"""
import csv
import math
from pathlib import Path

import numpy as np

from hdqkd.clicks import ClickTables
from hdqkd.errors import DataError, MalformedTableError, ParseError

TT_HEADER = ("i", "j", "value")
SS_HEADER = ("a", "b", "i", "j", "phiA", "phiB", "value")
NORMALIZATION = {"tt": "global", "ss": "per-setting, scaled to the four-cell arrival mass"}


def _read_rows(path, header, kinds):
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(f.strip() for f in first) != header:
            raise ParseError(f"expected header {','.join(header)}", path, 1)
        for lineno, fields in enumerate(reader, start=2):
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(fields)}", path, lineno)
            try:
                values = [kind(f.strip()) for kind, f in zip(kinds, fields)]
            except ValueError as exc:
                raise ParseError(str(exc), path, lineno) from None
            if not math.isfinite(values[-1]):
                raise ParseError("value is not finite", path, lineno)
            if values[-1] < 0.0:
                raise MalformedTableError(f"{path}:{lineno}: negative count {values[-1]}")
            rows.append((lineno, values))
    return rows


def load_click_csv(tt_path, ss_path=None, dim=None):
    """Read and normalise click tables; ``dim`` defaults to the largest bin + 1."""
    tt_rows = _read_rows(tt_path, TT_HEADER, (int, int, float))
    ss_rows = _read_rows(ss_path, SS_HEADER, (int, int, int, int, float, float, float)) if ss_path else []
    if not tt_rows:
        raise MalformedTableError(f"{tt_path}: no data rows")
    d = dim or 1 + max(max(v[0], v[1]) for _, v in tt_rows)
    tt = np.zeros((d, d))
    for lineno, (i, j, value) in tt_rows:
        if not (0 <= i < d and 0 <= j < d):
            raise ParseError(f"bin ({i},{j}) outside 0..{d - 1}", tt_path, lineno)
        tt[i, j] += value
    total = tt.sum()
    if total <= 0.0:
        raise MalformedTableError(f"{tt_path}: arrival counts sum to zero")
    tt /= total

    groups = {}
    for lineno, (a, b, i, j, pa, pb, value) in ss_rows:
        if a not in (1, 2) or b not in (1, 2):
            raise ParseError(f"detector labels must be 1 or 2, got ({a},{b})", ss_path, lineno)
        if not (1 <= i < d and 1 <= j < d):
            raise ParseError(f"superposition bins ({i},{j}) outside 1..{d - 1}", ss_path, lineno)
        groups.setdefault((i, j, pa, pb), {})[(a, b)] = value
    ss = {}
    for (i, j, pa, pb), outcomes in groups.items():
        mass = tt[i, j] + tt[i - 1, j] + tt[i, j - 1] + tt[i - 1, j - 1]
        count = sum(outcomes.values())
        for (a, b), value in outcomes.items():
            ss[(a, b, i, j, pa, pb)] = value / count * mass if count > 0.0 else 0.0

    meta = {"source": str(tt_path), "normalization": dict(NORMALIZATION)}
    if ss_path:
        meta["ss_source"] = str(ss_path)
    return ClickTables(d, tt, ss, meta)


def write_click_csv(tables, tt_path, ss_path=None):
    """Write tables in the format read by :func:`load_click_csv`."""
    with Path(tt_path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TT_HEADER)
        for i in range(tables.dim):
            for j in range(tables.dim):
                w.writerow((i, j, repr(float(tables.tt[i, j]))))
    if ss_path is not None:
        with Path(ss_path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SS_HEADER)
            for key in sorted(tables.ss):
                a, b, i, j, pa, pb = key
                w.writerow((a, b, i, j, repr(pa), repr(pb), repr(float(tables.ss[key]))))
