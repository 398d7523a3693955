"""File formats for fields, charts and lifespan records.

Binary dump layout (little-endian)::

    offset  type        content
    0       8 bytes     magic b"NULLGRID"
    8       float64     h
    16      int64       n_rows
    24      int64       n_cols
    32      int64       n_fields
    40      float64     row origin   (t of row 0)
    48      float64     column origin (r* of column 0 on the lattice, r on a chart)
    56      float64[]   n_fields blocks of n_rows * n_cols values, row-major

Lattice dumps have one row per level and ``W`` stored at ``values[n, i]``;
nodes outside the triangle or flagged by blow-up are NaN. Chart dumps hold
``eta, xi, eta_t, eta_r, xi_t, xi_r`` with NaN outside the valid mask.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"NULLGRID"
_HEADER = struct.Struct("<8sdqqqdd")

FIELD_COLUMNS = ("u_index", "v_index", "t", "r_star", "W")
COEFF_COLUMNS = ("t", "r", "xi", "eta", "C1", "C2", "C3", "prefactor")
CHART_FIELDS = ("eta", "xi", "eta_t", "eta_r", "xi_t", "xi_r")


@dataclass(frozen=True)
class GridDump:
    h: float
    row_origin: float
    col_origin: float
    fields: np.ndarray  # (n_fields, n_rows, n_cols)


def _open_error(path, exc: OSError) -> OSError:
    return OSError(exc.errno, f"{exc.strerror}: {path}")


def write_dump(path, h: float, fields, row_origin: float = 0.0, col_origin: float = 0.0) -> Path:
    path = Path(path)
    arr = np.asarray(fields, dtype="<f8")
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError("fields must be (n_fields, n_rows, n_cols)")
    k, nr, nc = arr.shape
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, float(h), nr, nc, k, float(row_origin), float(col_origin)))
            fh.write(np.ascontiguousarray(arr).tobytes())
    except OSError as exc:
        raise _open_error(path, exc) from None
    return path


def read_dump(path) -> GridDump:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise _open_error(path, exc) from None
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, h, nr, nc, k, r0, c0 = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * k * nr * nc
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(k, nr, nc)
    return GridDump(h, r0, c0, data.astype(float))


def dump_lattice(fld, path) -> Path:
    vals = np.where(fld.good(), fld.values, np.nan)[: fld.levels_done]
    return write_dump(path, fld.h, vals, 0.0, fld.x_min)


def dump_chart(chart, path) -> Path:
    blocks = [np.where(chart.valid, getattr(chart, name), np.nan) for name in CHART_FIELDS]
    return write_dump(path, chart.h, blocks, float(chart.t[0]), float(chart.r[0]))


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_cell(x) for x in row])
    except OSError as exc:
        raise _open_error(path, exc) from None
    return path


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def lattice_csv(fld, path) -> Path:
    u, v, t, rs, W = fld.uv_records()
    good = fld.good()[np.nonzero(fld.valid)]
    rows = zip(u[good], v[good], t[good], rs[good], W[good])
    return write_csv(path, FIELD_COLUMNS, rows)


def coefficients_csv(table: dict, path) -> Path:
    cols = [np.asarray(table[c], dtype=float) for c in COEFF_COLUMNS]
    return write_csv(path, COEFF_COLUMNS, zip(*cols))


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path, payload) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise _open_error(path, exc) from None
    return path
