"""Check reports: one fixed schema shared by every verification entry point.

Serialized shape: {"check": str, "pass": bool, "max_deviation": float,
"details": {...}, "provenance": {...}?}, pretty-printed with sorted keys and
a trailing newline.  NaN anywhere in a report is a hard error, never emitted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


@dataclass
class Report:
    check: str
    passed: bool
    max_deviation: float = 0.0
    details: dict = field(default_factory=dict)
    provenance: dict | None = None

    def to_dict(self) -> dict:
        doc: dict[str, Any] = {
            "check": self.check,
            "pass": bool(self.passed),
            "max_deviation": float(self.max_deviation),
            "details": self.details,
        }
        if self.provenance is not None:
            doc["provenance"] = self.provenance
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Report":
        return cls(check=doc["check"], passed=bool(doc["pass"]),
                   max_deviation=float(doc["max_deviation"]),
                   details=doc.get("details", {}),
                   provenance=doc.get("provenance"))


def _reject_nan(obj: Any, path: str = "$") -> None:
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ValueError(f"NaN forbidden in reports (at {path})")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _reject_nan(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _reject_nan(v, f"{path}[{i}]")


def render_report(report: Report) -> str:
    doc = report.to_dict()
    _reject_nan(doc)
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def emit_report(report: Report, path: str | Path) -> None:
    text = render_report(report)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"failed writing report to {path}: {exc}") from exc


def parse_report(source: str | Path) -> Report:
    p = Path(source)
    try:
        # report text longer than the OS path limit raises here, not just
        # "no such file" — either way it is not a path
        is_file = p.exists()
    except (OSError, ValueError):
        is_file = False
    if is_file:
        text = p.read_text(encoding="utf-8")
    else:
        text = str(source)
    return Report.from_dict(json.loads(text))
