"""CSV readers and writers for streams, matrices, masks and edge lists.

Numbers are written with ``repr(float)``, the shortest decimal string that
round-trips exactly, so artifacts are byte-stable across runs.
"""

import csv
import math

import numpy as np

from .bounds import format_float
from .errors import DataError


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_matrix(path, m):
    """``p`` lines of ``p`` comma-separated fields, row-major."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        for row in np.atleast_2d(m):
            w.writerow([format_float(v) for v in row])


def read_matrix(path):
    rows = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec:
                continue
            rows.append(_parse_row(rec, lineno))
    if not rows or any(len(r) != len(rows) for r in rows):
        raise DataError(f"{path} does not hold a square matrix")
    return np.array(rows)


def write_stream(path, data, header=False):
    """Write a ``p x t`` data matrix with one observation (column) per line."""
    data = np.asarray(data, dtype=float)
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        if header:
            w.writerow([f"x{i + 1}" for i in range(data.shape[0])])
        for col in data.T:
            w.writerow([format_float(v) for v in col])


def _parse_row(rec, lineno):
    try:
        vals = [float(v) for v in rec]
    except ValueError as exc:
        raise DataError(f"cannot parse value ({exc})", line=lineno) from None
    if not all(math.isfinite(v) for v in vals):
        raise DataError("non-finite value", line=lineno)
    return vals


def _is_header(rec):
    try:
        [float(v) for v in rec]
    except ValueError:
        return True
    return False


def iter_stream(path, p=None):
    """Yield ``(line_number, observation)`` from a stream CSV.

    An optional header line (any non-numeric field on line 1) is skipped.
    Every row must have ``p`` finite fields; ``p`` defaults to the width of
    the first data row.
    """
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if lineno == 1 and _is_header(rec):
                continue
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if p is None:
                p = len(rec)
            if len(rec) != p:
                raise DataError(f"expected {p} fields, found {len(rec)}", line=lineno)
            yield lineno, np.array(_parse_row(rec, lineno))


def read_stream(path, p=None):
    """Read a whole stream CSV into a ``p x t`` matrix."""
    cols = [x for _, x in iter_stream(path, p)]
    if not cols:
        raise DataError(f"{path} contains no observations")
    return np.array(cols).T


def write_mask(path, mask):
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["row", "col"])
        for i, j in mask.positions():
            w.writerow([int(i), int(j)])


def read_mask_positions(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [(int(i), int(j)) for i, j in reader]


def write_edges(path, edges):
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["i", "j"])
        for i, j in edges:
            w.writerow([i, j])


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (str, int, np.integer)) else format_float(v) for v in row])
