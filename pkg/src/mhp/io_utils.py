"""Small shared I/O helpers: atomic JSON writes and round-trip float text."""

from __future__ import annotations

import json
import os
from pathlib import Path


def write_json_atomic(path, obj, *, indent: int | None = 2) -> Path:
    """Serialize ``obj`` to ``path`` via a temp file and rename."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=indent)
        fh.write("\n")
    os.replace(tmp, path)
    return path


def format_float(value: float) -> str:
    """Shortest decimal text that round-trips to the same float64."""
    return repr(float(value))
