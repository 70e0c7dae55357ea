"""File helpers: CSV datasets, atomic writes, PGM heatmaps, score tables."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .errors import DimensionMismatch, InputError, NonBinaryValue, ParseError
from .surrogate import Dataset, Instance


def ingest_csv(path, label_col: str | None = None) -> Dataset:
    """Read a 0/1 CSV with a header row.

    Coordinates in errors are 1-based file lines and columns.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return parse_csv(text, label_col)


def parse_csv(text: str, label_col: str | None = None) -> Dataset:
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty file", line=1) from None
    label_at = None
    if label_col is not None:
        if label_col not in header:
            raise ParseError(f"label column {label_col!r} not in header", line=1)
        label_at = header.index(label_col)
    names = [h for i, h in enumerate(header) if i != label_at]
    if len(set(names)) != len(names):
        raise ParseError("duplicate feature names in header", line=1)
    rows = []
    for lineno, fields in enumerate(reader, start=2):
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(fields)}", line=lineno)
        values = []
        lab = None
        for col, raw in enumerate(fields, start=1):
            tok = raw.strip()
            if tok not in ("0", "1"):
                raise NonBinaryValue(f"non-binary value {tok!r}", line=lineno, column=col)
            if col - 1 == label_at:
                lab = int(tok)
            else:
                values.append(int(tok))
        rows.append(Instance(tuple(values), lab))
    return Dataset(names, rows)


def atomic_write(path, data: str | bytes) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def heatmap_bytes(scores: Sequence[float | Fraction | None], width: int, height: int) -> bytes:
    """Binary PGM (P5), row-major by feature index, scaled so the top score is 255."""
    if width <= 0 or height <= 0 or width * height != len(scores):
        raise DimensionMismatch(f"{width}x{height} grid does not fit {len(scores)} features")
    vals = [Fraction(0) if s is None else Fraction(s) for s in scores]
    top = max(vals)
    if top <= 0:
        pixels = bytes(len(vals))
    else:
        pixels = bytes(int(round(255 * v / top)) if v > 0 else 0 for v in vals)
    return f"P5\n{width} {height}\n255\n".encode() + pixels


def emit_heatmap(scores, width: int, height: int, path) -> None:
    atomic_write(path, heatmap_bytes(scores, width, height))


def read_pgm(data: bytes) -> tuple[int, int, bytes]:
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5":
        raise ParseError("not a binary PGM")
    w, h = map(int, parts[1].split())
    return w, h, parts[3]


def fmt_score(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def feature_table_csv(feature_names: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature_name", "FI", "FG", "FR"])
    for fs in rows:
        w.writerow([feature_names[fs.feature]] + [fmt_score(fs.scores.get(k)) for k in ("FI", "FG", "FR")])
    return buf.getvalue()


def explanation_table_csv(feature_names: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["explanation", "size", "PAR", "GEN", "RESP", "RESP_neighborhood"])
    for se in rows:
        e = se.explanation
        label = " AND ".join(f"{feature_names[f]}={v}" for f, v in sorted(e.items))
        w.writerow([label, e.size] + [fmt_score(se.scores.get(k)) for k in ("PAR", "GEN", "RESP", "RESP_neighborhood")])
    return buf.getvalue()


def read_table_csv(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))
