"""CSV and JSON input/output with atomic writes and config echoes."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .dm import Corpus

__all__ = [
    "InputError",
    "atomic_write_text",
    "write_csv",
    "write_json",
    "read_counts_csv",
    "read_tuple_csv",
    "read_json",
    "to_jsonable",
]


class InputError(ValueError):
    """Malformed input file; the message names the offending line."""


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy values and tuples into JSON-friendly types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    return str(obj)


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    if not path.parent.is_dir():
        raise FileNotFoundError(f"output directory {path.parent} does not exist")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _format(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(
    path: str | os.PathLike,
    header: Sequence[str],
    rows: Iterable[Sequence],
    config: dict | None = None,
) -> Path:
    """CSV with an optional leading ``# config=<json>`` comment line."""
    buf = io.StringIO()
    if config is not None:
        buf.write("# config=" + json.dumps(to_jsonable(config), sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([_format(v) for v in r])
    return atomic_write_text(path, buf.getvalue())


def write_json(path: str | os.PathLike, obj: Any) -> Path:
    return atomic_write_text(path, json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")


def read_json(path: str | os.PathLike) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}: invalid JSON ({exc.msg})") from exc


def _data_lines(path):
    """Yield ``(line_number, fields)`` skipping blank and ``#`` comment lines."""
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, next(csv.reader([line]))


def read_counts_csv(path: str | os.PathLike) -> Corpus:
    """Count matrix with a mandatory ``cat_1,...,cat_K`` header."""
    lines = _data_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise InputError(f"{path}: empty file") from None
    header = [h.strip() for h in header]
    if not header or any(not h for h in header) or all(h.lstrip("-").isdigit() for h in header):
        raise InputError(f"{path}: line {lineno}: expected a header row like cat_1,...,cat_K")
    rows = []
    for lineno, fields in lines:
        if len(fields) != len(header):
            raise InputError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(fields)}")
        try:
            vals = [int(f.strip()) for f in fields]
        except ValueError:
            raise InputError(f"{path}: line {lineno}: counts must be integers") from None
        if any(v < 0 for v in vals):
            raise InputError(f"{path}: line {lineno}: counts must be non-negative")
        rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no documents")
    return Corpus(np.asarray(rows, dtype=np.int64))


def read_tuple_csv(path: str | os.PathLike) -> tuple[list[str], list[tuple[str, ...]]]:
    """Observation tuples with a ``pos_1,...,pos_p`` header; returns ``(header, rows)``."""
    lines = _data_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise InputError(f"{path}: empty file") from None
    header = [h.strip() for h in header]
    if any(not h for h in header):
        raise InputError(f"{path}: line {lineno}: empty column name in header")
    rows = []
    for lineno, fields in lines:
        fields = [f.strip() for f in fields]
        if len(fields) != len(header):
            raise InputError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(fields)}")
        if any(not f for f in fields):
            raise InputError(f"{path}: line {lineno}: empty level")
        rows.append(tuple(fields))
    return header, rows
