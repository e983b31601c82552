"""Deterministic JSON and CSV output.

JSON keys are sorted and floats use Python's shortest round-trip repr, so the
same inputs always give the same bytes.  Non-finite floats are written as the
strings "inf" / "-inf"; NaN becomes null.  CSV floats use 17 significant digits.
"""

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass

import numpy as np


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def from_json_float(v):
    """Inverse of the non-finite encoding used by ``dumps``."""
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    if v is None:
        return math.nan
    return float(v)


def format_float(v):
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def trajectory_csv(traj):
    n, m = traj.slow_dim, traj.states.shape[1] - traj.slow_dim
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"z{j + 1}" for j in range(m)] + ["V", "W", "Psi"]
    rows = []
    for k in range(len(traj.times)):
        vals = [traj.times[k], *traj.states[k], traj.V[k], traj.W[k], traj.Psi[k]]
        rows.append([format_float(v) for v in vals])
    return _csv_text(header, rows)


def sweep_csv(table):
    """Rows of the sweep table; a cell that never settled has an empty settle_time."""
    rows = [[format_float(mag), str(j), format_float(settle)] for mag, j, settle, _ in table["rows"]]
    return _csv_text(["magnitude", "direction_index", "settle_time"], rows)


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
