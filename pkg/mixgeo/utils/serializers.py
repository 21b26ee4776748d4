"""
JSON, CSV and text emitters with atomic writes.

Data files are pure functions of their inputs: floats are written with
repr (shortest exact round trip) and run metadata goes to a separate
`<out>.meta.json` sidecar.
"""
import csv
import io
import json
import logging
import math
import os
import tempfile
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from ..models.reports import plain

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def _float(x: float) -> Any:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return x


def to_jsonable(value: Any) -> Any:
    """Plain Python values with non-finite floats replaced by strings."""
    value = plain(value)
    if isinstance(value, float):
        return _float(value)
    if isinstance(value, dict):
        return {k: to_jsonable(v) for k, v in value.items()}
    if isinstance(value, list):
        return [to_jsonable(v) for v in value]
    return value


def envelope(command: str, config: Dict[str, Any], result: Any) -> Dict[str, Any]:
    return {"schema": SCHEMA_VERSION, "command": command, "config": config, "result": result}


def dump_json(command: str, config: Dict[str, Any], result: Any) -> str:
    """Versioned report document as text."""
    doc = to_jsonable(envelope(command, config, result))
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def format_number(x: float) -> str:
    x = float(x)
    return str(_float(x)) if not math.isfinite(x) else repr(x)


def profile_csv(points: np.ndarray, values: np.ndarray) -> str:
    """Profile rows with header `t,value` (one chart coordinate) or `s1,...,value`."""
    points = np.asarray(points, dtype=float)
    points = points.reshape(len(points), -1)
    header = ["t"] if points.shape[1] == 1 else [f"s{i}" for i in range(1, points.shape[1] + 1)]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header + ["value"])
    for row, value in zip(points, values):
        writer.writerow([format_number(x) for x in row] + [format_number(value)])
    return buffer.getvalue()


def rows_csv(rows: Sequence[Dict[str, Any]], columns: Optional[List[str]] = None) -> str:
    """Generic record table, columns in first-seen order unless given."""
    if columns is None:
        columns = []
        for row in rows:
            columns.extend(k for k in row if k not in columns)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        cells = []
        for key in columns:
            value = row.get(key, "")
            cells.append(format_number(value) if isinstance(value, float) else value)
        writer.writerow(cells)
    return buffer.getvalue()


def text_summary(title: str, lines: Iterable[str]) -> str:
    body = "\n".join(f"  {line}" for line in lines)
    return f"{title}\n{body}\n"


def write_atomic(path: str, text: str) -> None:
    """Write text to path through a temp file in the same directory and os.replace."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".mixgeo-", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except OSError:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    logger.debug(f"Wrote {len(text)} characters to {path}")


def write_sidecar(path: str, version: str, env: str, threads: int, command: Optional[str] = None) -> str:
    """Run metadata next to a data file; returns the sidecar path."""
    meta = {
        "version": version,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "env": env,
        "threads": threads,
        "command": command,
        "data_file": os.path.basename(path),
    }
    sidecar = f"{path}.meta.json"
    write_atomic(sidecar, json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return sidecar
