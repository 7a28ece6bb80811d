"""File formats: interaction-matrix input, result tables, atomic writes."""

from __future__ import annotations

import csv
import io
import json
import os
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from .errors import ValidationError


class MatrixFormatError(ValidationError):
    """Malformed matrix file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def parse_matrix_text(text: str) -> np.ndarray:
    """Parse the plain-text or JSON matrix format.

    Text form: first non-comment line is ``k``, then ``k`` rows of ``k``
    whitespace-separated floats.  Lines starting with ``#`` and blank lines
    are skipped.  A document starting with ``{`` is read as
    ``{"k": int, "entries": [[...], ...]}``.
    """
    if text.lstrip().startswith("{"):
        return _parse_matrix_json(text)

    rows = []
    k = None
    k_line = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if k is None:
            try:
                k = int(line)
            except ValueError:
                raise MatrixFormatError(f"expected integer k, got {line!r}", lineno) from None
            if k < 1:
                raise MatrixFormatError(f"k must be positive, got {k}", lineno)
            k_line = lineno
            continue
        if len(rows) == k:
            raise MatrixFormatError(f"unexpected extra row (k={k})", lineno)
        fields = line.split()
        if len(fields) != k:
            raise MatrixFormatError(f"expected {k} values, got {len(fields)}", lineno)
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise MatrixFormatError(f"non-numeric value in {line!r}", lineno) from None
    if k is None:
        raise MatrixFormatError("empty matrix file", 1)
    if len(rows) != k:
        raise MatrixFormatError(f"expected {k} rows, found {len(rows)}", k_line)
    return np.array(rows, dtype=float)


def _parse_matrix_json(text: str) -> np.ndarray:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MatrixFormatError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(doc, dict) or "k" not in doc or "entries" not in doc:
        raise MatrixFormatError('JSON matrix needs keys "k" and "entries"')
    k = doc["k"]
    entries = doc["entries"]
    if not isinstance(k, int) or k < 1:
        raise MatrixFormatError(f"k must be a positive integer, got {k!r}")
    if not isinstance(entries, list) or len(entries) != k:
        raise MatrixFormatError(f"entries must hold {k} rows")
    for i, row in enumerate(entries):
        if not isinstance(row, list) or len(row) != k:
            raise MatrixFormatError(f"row {i} must hold {k} values")
    try:
        return np.array(entries, dtype=float)
    except (TypeError, ValueError):
        raise MatrixFormatError("entries must be numeric") from None


def read_matrix(path) -> np.ndarray:
    return parse_matrix_text(Path(path).read_text(encoding="utf-8"))


def format_matrix_text(A) -> str:
    A = np.asarray(A, dtype=float)
    lines = [str(A.shape[0])]
    lines += [" ".join(repr(float(v)) for v in row) for row in A]
    return "\n".join(lines) + "\n"


def atomic_write(path, data: str) -> None:
    """Write ``data`` to ``path`` via a temp file and rename.

    ``path`` of ``None`` or ``"-"`` means stdout.
    """
    if path is None or str(path) == "-":
        sys.stdout.write(data)
        sys.stdout.flush()
        return
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def git_describe() -> str:
    """``git describe --always --dirty`` of the package checkout, or ``unknown``."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True, text=True, timeout=5, check=True)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def render_table(rows, columns, fmt="csv", header=None) -> str:
    """Serialize a list of row dicts.

    CSV output starts with ``# key: value`` lines for the header, then the
    column names.  JSON output is one object ``{"header": ..., "rows": [...]}``.
    """
    header = dict(header or {})
    if fmt == "csv":
        buf = io.StringIO()
        for key, value in header.items():
            buf.write(f"# {key}: {_fmt(value)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
        return buf.getvalue()
    if fmt == "json":
        doc = {"header": {k: _jsonable(v) for k, v in header.items()},
               "columns": list(columns),
               "rows": [{c: _jsonable(row[c]) for c in columns} for row in rows]}
        return json.dumps(doc, indent=2) + "\n"
    raise ValidationError(f"unknown format {fmt!r}")


def render_jsonl(rows, columns, header=None) -> str:
    """JSON-lines: first line is the header object, then one object per row."""
    lines = [json.dumps({"header": {k: _jsonable(v) for k, v in (header or {}).items()}})]
    lines += [json.dumps({c: _jsonable(row[c]) for c in columns}) for row in rows]
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        v = float(v)
    if isinstance(v, float) and not np.isfinite(v):
        return None
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def read_csv_table(text: str):
    """Inverse of :func:`render_table` for CSV: returns ``(header, rows)``."""
    header = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            header[key] = value
        else:
            body.append(line)
    rows = list(csv.DictReader(body))
    return header, rows
