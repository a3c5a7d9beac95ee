"""Deterministic JSON and CSV writers.

Identical inputs must produce byte-identical files: keys are sorted, floats
render as the shortest decimal that round-trips the underlying 64-bit value
(Python's repr), line endings are LF, and no timestamps enter data files
(run metadata lives in meta.json, which is exempt from the determinism
contract).
"""

from __future__ import annotations

import json
import math
from pathlib import Path

__all__ = ["fmt_float", "write_json", "write_csv", "read_csv"]


def fmt_float(x: float) -> str:
    """Shortest round-trip decimal of a 64-bit float."""
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):  # numpy scalar
        return _jsonable(obj.item())
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def write_json(path: Path, obj) -> None:
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")


def write_csv(path: Path, header: "list[str]", columns: "list") -> None:
    """Write columns (sequences of equal length) under a header row."""
    n = len(columns[0]) if columns else 0
    for col in columns:
        if len(col) != n:
            raise ValueError("csv columns must share one length")
    lines = [",".join(header)]
    for row in range(n):
        cells = []
        for col in columns:
            v = col[row]
            if isinstance(v, (int,)) and not isinstance(v, bool):
                cells.append(str(v))
            else:
                cells.append(fmt_float(float(v)))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_csv(path: Path) -> "tuple[list[str], list[list[float]]]":
    """Read a csv written by write_csv back into (header, columns)."""
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    columns: list[list[float]] = [[] for _ in header]
    for line in lines[1:]:
        for j, cell in enumerate(line.split(",")):
            columns[j].append(float(cell))
    return header, columns
