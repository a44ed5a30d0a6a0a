"""Plot-ready CSV tables.

Every file starts with a comment line naming its schema and version, then a
header row. Floats use 9 significant digits with '.' as decimal separator,
independent of locale.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CaptureFormatError, ConfigError

CSV_VERSION = 1

SCHEMAS = {
    "statistics": ("su_id", "block", "statistic", "value"),
    "roc": ("snr_db", "statistic", "pfa", "pd"),
    "fits": ("family", "param_names", "param_1", "param_2", "loglik", "k", "aic", "p_value",
             "best"),
    "cdf": ("y", "F1", "F0"),
}


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def schema_line(schema: str) -> str:
    return f"# specsense {schema} v{CSV_VERSION}"


def write_csv(path: str | Path, schema: str, rows: Iterable[Sequence]) -> None:
    columns = SCHEMAS[schema]
    buf = io.StringIO()
    buf.write(schema_line(schema) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"{schema} row has {len(row)} fields, expected {len(columns)}")
        w.writerow([fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path: str | Path) -> tuple[str | None, list[dict[str, str]]]:
    """Rows of a CSV as dicts, plus the schema name if the file declares one."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise CaptureFormatError(f"missing file: {path}") from exc
    lines = text.splitlines()
    schema = None
    if lines and lines[0].startswith("# specsense "):
        parts = lines[0].split()
        schema = parts[2] if len(parts) >= 4 else None
        if len(parts) < 4 or parts[3] != f"v{CSV_VERSION}":
            raise CaptureFormatError(f"unsupported CSV version in {path}: {lines[0]!r}")
    body = [ln for ln in lines if not ln.startswith("#")]
    return schema, list(csv.DictReader(body))


def read_values(path: str | Path, column: str = "value", where: dict | None = None) -> np.ndarray:
    """One numeric column, optionally filtered on exact string matches."""
    _, rows = read_csv(path)
    if not rows:
        raise ConfigError(f"{path} has no data rows")
    if column not in rows[0]:
        raise ConfigError(f"{path} has no column {column!r}; columns are {list(rows[0])}")
    where = where or {}
    try:
        vals = [float(r[column]) for r in rows
                if all(r.get(k) == str(v) for k, v in where.items())]
    except ValueError as exc:
        raise CaptureFormatError(f"non-numeric value in column {column!r}: {exc}") from exc
    if not vals:
        raise ConfigError(f"no rows in {path} match {where}")
    out = np.asarray(vals)
    if np.any(np.isnan(out)):
        raise CaptureFormatError(f"NaN in column {column!r}")
    return out
