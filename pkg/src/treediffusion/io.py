"""Deterministic CSV/JSON export.

Numbers are written with 17 significant digits (``repr``-exact for float64),
columns in a fixed order, rows in rank order (level, then lexicographic path)
and time order within a vertex.  Files are written to a temporary sibling and
renamed into place.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .tree import format_path, iter_vertices, psi_values

FIELD_HEADER = ("vertex", "level", "psi", "t", "value")
DECAY_HEADER = ("t", "max_abs_u", "bound")


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    try:
        directory.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    for row in rows:
        writer.writerow([c if isinstance(c, str) else fmt(c) for c in row])
    return buf.getvalue()


def field_rows(field, root_only: bool = False):
    """(vertex, level, psi, t, value) rows; streamed fields only export the root."""
    shape = field.shape
    t = field.grid.nodes
    if root_only or field.values is None:
        for k, tk in enumerate(t):
            yield ("", 0, 0.0, tk, field.root[k])
        return
    psi = psi_values(shape)
    for r, path in enumerate(iter_vertices(shape)):
        label = format_path(path)
        col = field.values[:, r]
        for k, tk in enumerate(t):
            yield (label, len(path), psi[r], tk, col[k])


def export_field_csv(field, path, root_only: bool = False) -> Path:
    return atomic_write_text(path, _csv_text(FIELD_HEADER, field_rows(field, root_only)))


def export_decay_csv(report, path) -> Path:
    rows = [] if report is None else report.rows()
    return atomic_write_text(path, _csv_text(DECAY_HEADER, rows))


def export_polynomial_csv(solution, path) -> Path:
    rows = [(v, lvl, deg, *(float(c) for c in cs)) for v, lvl, deg, *cs in solution.rows()]
    width = max((len(r) - 3 for r in rows), default=1)
    header = ("vertex", "level", "degree", *(f"c{j}" for j in range(width)))
    return atomic_write_text(path, _csv_text(header, rows))


def export_rows_csv(header, rows, path) -> Path:
    return atomic_write_text(path, _csv_text(header, rows))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan
        return x if np.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def export_json(obj, path) -> Path:
    return atomic_write_text(path, dumps(obj))
