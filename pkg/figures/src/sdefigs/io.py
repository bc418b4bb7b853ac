"""CSV ingestion for the harness schemas.

Files start with '#'-prefixed metadata lines, then a header row, then
data rows.  Columns are returned as a dict of numpy arrays (strings for
the method/variant columns, floats elsewhere).
"""
from __future__ import annotations

import numpy as np

#: columns each figure kind requires (drift may carry extra defect columns)
SCHEMAS = {
    "drift": ("path_id", "method", "t", "defect1"),
    "convergence": ("method", "h", "rmse", "stderr", "paths"),
}

_TEXT_COLUMNS = {"method", "variant"}


class SchemaError(ValueError):
    pass


def read_csv(path: str):
    """Parse one harness CSV; returns (meta_lines, columns dict)."""
    meta = []
    header = None
    rows = []
    with open(path) as f:
        for raw in f:
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                meta.append(line[1:].strip())
                continue
            cells = line.split(",")
            if header is None:
                header = cells
                continue
            rows.append(cells)
    if header is None:
        raise SchemaError(f"{path}: no header row found")
    columns = {}
    for idx, name in enumerate(header):
        values = [r[idx] for r in rows]
        if name in _TEXT_COLUMNS:
            columns[name] = np.array(values, dtype=object)
        else:
            columns[name] = np.array([float(v) for v in values])
    return meta, columns


def check_schema(columns: dict, kind: str, path: str) -> None:
    """Raise with an explicit column-name diagnostic on mismatch."""
    required = SCHEMAS[kind]
    missing = [c for c in required if c not in columns]
    if missing:
        raise SchemaError(
            f"{path}: not a {kind} file: missing columns {missing}; "
            f"expected {list(required)}, found {sorted(columns)}"
        )


def merge_columns(parts: list) -> dict:
    """Concatenate column dicts that share a header."""
    keys = list(parts[0])
    for p in parts[1:]:
        if list(p) != keys:
            raise SchemaError(
                f"input files disagree on columns: {keys} vs {list(p)}"
            )
    return {k: np.concatenate([p[k] for p in parts]) for k in keys}


def harness_slopes(meta: list) -> dict:
    """Fitted slopes echoed by the harness ('slope <method> <value>')."""
    out = {}
    for line in meta:
        parts = line.split()
        if len(parts) == 3 and parts[0] == "slope":
            out[parts[1]] = float(parts[2])
    return out
