"""CSV/JSON writers with reproducible formatting.

Floats are written with ``repr`` (shortest round-trip form, at most 17
significant digits) and JSON keys keep insertion order, so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np


def fmt_float(x) -> str:
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj))
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt_float(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def _block_names(prefix: str, shape) -> list[str]:
    r, c = shape
    return [f"{prefix}_{i + 1}{j + 1}" for i in range(r) for j in range(c)]


def _flatten(*blocks) -> np.ndarray:
    return np.concatenate([b.reshape(b.shape[0], -1) for b in blocks], axis=1)


def riccati_table(sol):
    header = ["t"] + _block_names("P11", sol.P11.shape[1:]) \
        + _block_names("P12", sol.P12.shape[1:]) + _block_names("P22", sol.P22.shape[1:])
    rows = np.column_stack([sol.grid, _flatten(sol.P11, sol.P12, sol.P22)])
    return header, rows


def reduced_table(red):
    header = ["t"] + _block_names("P11bar", red.P11bar.shape[1:]) \
        + _block_names("P12bar", red.P12bar.shape[1:])
    rows = np.column_stack([red.grid, _flatten(red.P11bar, red.P12bar)])
    return header, rows


def boundary_table(bl):
    env12, env22 = bl.envelopes()
    header = ["tau"] + _block_names("P12hat", bl.P12hat.shape[1:]) \
        + _block_names("P22hat", bl.P22hat.shape[1:]) + ["env12", "env22"]
    rows = np.column_stack([bl.tau_grid, _flatten(bl.P12hat, bl.P22hat), env12, env22])
    return header, rows
