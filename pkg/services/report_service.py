"""Report payloads and their JSON / CSV emission.

Every CLI run produces one :class:`Report`. Verifications are written as JSON;
Δ-curves as CSV with one row per Δ. Output goes to ``--out`` or stdout.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from config import settings

logger = logging.getLogger("replica_lab.report")


@dataclass
class Report:
    """Outcome of one subcommand.

    ``outputs`` holds named reals (or lists of reals); ``passed`` is None for
    subcommands that compute without verifying.
    """

    subcommand: str
    inputs: dict[str, Any]
    outputs: dict[str, Any] = field(default_factory=dict)
    passed: bool | None = None
    checks: dict[str, bool] = field(default_factory=dict)
    wall_time: float = 0.0
    version: str = settings.VERSION

    def payload(self, include_wall_time: bool = True) -> dict[str, Any]:
        out = {
            "subcommand": self.subcommand,
            "inputs": self.inputs,
            "outputs": _jsonable(self.outputs),
            "pass": self.passed,
            "checks": self.checks,
            "version": self.version,
        }
        if include_wall_time:
            out["wall_time"] = round(self.wall_time, 3)
        return out

    def to_json(self, include_wall_time: bool = True) -> str:
        return json.dumps(self.payload(include_wall_time), indent=2, sort_keys=True, ensure_ascii=False)


def _jsonable(value: Any) -> Any:
    """Map non-finite floats to strings and tuples to lists; JSON has no NaN."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    try:
        number = float(value)
    except (TypeError, ValueError):
        return str(value)
    if math.isfinite(number):
        return number
    return "nan" if math.isnan(number) else ("inf" if number > 0 else "-inf")


def _emit(text: str, path: str | Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    logger.info(f"✅ Report written to {path}")


def write_report(report: Report, path: str | Path | None = None) -> None:
    """Write ``report`` as JSON to ``path`` or stdout."""
    _emit(report.to_json(), path)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def write_csv(columns: Sequence[str], rows: Iterable[Sequence[Any]], path: str | Path | None = None) -> None:
    """Write a curve as CSV to ``path`` or stdout."""
    _emit(csv_text(columns, rows), path)
