"""Report serialization: JSON with 17 significant digits and plain CSV tables.

``report.json`` holds two top-level keys.  ``payload`` is a pure function of
the config and master seed; ``run`` carries the timestamp, worker count and
output directory, which may differ between otherwise identical runs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = ["format_number", "dumps", "write_csv", "emit_report", "timestamp"]


def format_number(x: float) -> str:
    """17 significant digits, enough to round-trip every double."""
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _plain(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Fraction):
        return float(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        s = format_number(obj)
        # JSON has no non-finite literals; emit them as strings
        return json.dumps(s) if s in ("NaN", "Infinity", "-Infinity") else s
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    return _encode(_plain(obj), indent, 0) + "\n"


def _cell(v: Any) -> str:
    v = _plain(v)
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return format_number(v)
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"{path.name}: row has {len(row)} cells, header has {len(header)}")
        w.writerow([_cell(v) for v in row])
    try:
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def emit_report(
    output: Path,
    formats: Sequence[str],
    payload: dict,
    run: dict,
    tables: dict[str, tuple[Sequence[str], list]] | None = None,
) -> list[Path]:
    """Write ``report.json`` (when ``json`` is enabled) and one CSV per table (when ``csv`` is)."""
    output = Path(output)
    try:
        output.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {output}: {exc.strerror or exc}") from exc
    written = []
    if "json" in formats:
        path = output / "report.json"
        try:
            path.write_text(dumps({"payload": payload, "run": run}))
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
        written.append(path)
    if "csv" in formats:
        for name, (header, rows) in (tables or {}).items():
            path = output / name
            write_csv(path, header, rows)
            written.append(path)
    return written
