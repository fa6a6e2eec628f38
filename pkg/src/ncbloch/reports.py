"""
Result bundles and their byte-stable export.

JSON output has sorted keys and every float written as ``%.12e``; complex
numbers become ``[re, im]``.  Wall-clock data lives only in ``metadata.json``
so that ``bundle.json`` and the CSV tables are identical across runs.
"""

from __future__ import annotations

import csv
import io
import json
import math
import platform
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

FLOAT_FORMAT = "%.12e"


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    tolerance: float
    passed: bool

    @classmethod
    def at_most(cls, name: str, measured: float, tolerance: float) -> "Check":
        return cls(name, float(measured), float(tolerance), bool(measured <= tolerance))


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)


@dataclass
class ResultBundle:
    command: str
    params: dict[str, Any]
    seed: int
    tables: dict[str, Table] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failing(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_document(self) -> dict:
        return {
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
            "metadata": {"versions": versions(), "seed": self.seed},
            "summary": self.summary,
            "tables": {k: {"columns": t.columns, "rows": t.rows} for k, t in self.tables.items()},
            "checks": [{"name": c.name, "measured": c.measured, "tolerance": c.tolerance, "pass": c.passed}
                       for c in self.checks],
            "passed": self.passed,
        }


def versions() -> dict[str, str]:
    import mpmath
    import scipy

    from . import __version__

    return {"ncbloch": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "mpmath": mpmath.__version__, "python": platform.python_version()}


def _plain(value: Any) -> Any:
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.complexfloating, complex)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        # not valid JSON numbers; keep them readable and parseable as strings
        return json.dumps(repr(x))
    return FLOAT_FORMAT % x


def dumps(doc: Any, indent: int = 2) -> str:
    """JSON with sorted keys and fixed float formatting."""
    pad = " " * indent

    def emit(v, depth):
        if isinstance(v, bool) or v is None:
            return json.dumps(v)
        if isinstance(v, int):
            return str(v)
        if isinstance(v, float):
            return _format_float(v)
        if isinstance(v, str):
            return json.dumps(v)
        if isinstance(v, list):
            if not v:
                return "[]"
            inner = (",\n" + pad * (depth + 1)).join(emit(x, depth + 1) for x in v)
            return "[\n" + pad * (depth + 1) + inner + "\n" + pad * depth + "]"
        if isinstance(v, dict):
            if not v:
                return "{}"
            items = [json.dumps(k) + ": " + emit(v[k], depth + 1) for k in sorted(v)]
            return "{\n" + pad * (depth + 1) + (",\n" + pad * (depth + 1)).join(items) + "\n" + pad * depth + "}"
        raise TypeError(f"cannot serialize {type(v).__name__}")

    return emit(_plain(doc), 0) + "\n"


def table_csv(table: Table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_format_float(float(v)) if isinstance(v, (float, np.floating)) else v
                         for v in _plain(row)])
    return buf.getvalue()


def read_csv(text: str) -> tuple[list[str], list[list[str]]]:
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


def checks_table(bundle: ResultBundle) -> Table:
    return Table(["name", "measured", "tolerance", "pass"],
                 [[c.name, c.measured, c.tolerance, int(c.passed)] for c in bundle.checks])


def metadata(bundle: ResultBundle) -> dict:
    return {"versions": versions(), "seed": bundle.seed, "command": bundle.command,
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")}


def export(bundle: ResultBundle, out_dir: str | Path, fmt: str = "json") -> list[Path]:
    """Write the bundle; returns the files written.

    ``json`` writes ``bundle.json``; ``csv`` writes one CSV per table plus
    ``checks.csv``.  Both write ``metadata.json`` with the timestamp.
    """
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "json":
        path = out / "bundle.json"
        path.write_text(dumps(bundle.to_document()))
        written.append(path)
    else:
        for name, table in sorted(bundle.tables.items()):
            path = out / f"{name}.csv"
            path.write_text(table_csv(table))
            written.append(path)
        path = out / "checks.csv"
        path.write_text(table_csv(checks_table(bundle)))
        written.append(path)
    meta = out / "metadata.json"
    meta.write_text(json.dumps(metadata(bundle), indent=2, sort_keys=True) + "\n")
    written.append(meta)
    return written
