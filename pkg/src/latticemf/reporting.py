"""Deterministic CSV/JSON report writers.

CSV bodies are byte-reproducible under a fixed seed: UTF-8, header row,
comma separator, floats at 17 significant digits, no timestamps.
Timestamps and wall-clock metadata live only in the JSON summaries.
"""

from __future__ import annotations

import json
import os
from datetime import datetime, timezone

JSON_SCHEMA_VERSION = "1"


def format_value(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int,)):
        return str(x)
    if isinstance(x, complex):
        return f"{x.real:.17g}{x.imag:+.17g}j"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_summary(path, experiment, passed, checks, meta=None):
    """JSON summary with pass/fail per asserted property."""
    doc = {
        "schema_version": JSON_SCHEMA_VERSION,
        "experiment": experiment,
        "passed": bool(passed),
        "checks": _jsonable(checks),
        "meta": _jsonable(
            {
                **(meta or {}),
                "timestamp_utc": datetime.now(timezone.utc).isoformat(),
            }
        ),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
