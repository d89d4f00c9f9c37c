"""JSON and plain-text rendering of reports."""

from __future__ import annotations

import json
import math
from datetime import datetime, timezone

import numpy as np

from . import __version__

TOOL = "lopa"


def sanitize(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats to JSON values."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, (complex, np.complexfloating)):
        return [sanitize(obj.real), sanitize(obj.imag)]
    return obj


def build_report(subcommand: str, config: dict, verdict: str, result: dict,
                 checks: dict | None = None, timestamp: str | None = None) -> dict:
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return sanitize({"tool": TOOL, "version": __version__, "subcommand": subcommand,
                     "config": config, "verdict": verdict, "checks": checks or {},
                     "result": result, "timestamp": timestamp})


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False)


def strip_timestamp(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timestamp"}


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, dict)):
        s = json.dumps(v)
        return s if len(s) <= 60 else s[:57] + "..."
    return str(v)


def table(rows, headers=("field", "value")) -> str:
    """Left-aligned columns separated by two spaces."""
    cells = [[str(h) for h in headers]] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def render_text(report: dict) -> str:
    head = [("tool", f"{report['tool']} {report['version']}"),
            ("subcommand", report["subcommand"]), ("verdict", report["verdict"])]
    out = [table(head)]
    if report.get("checks"):
        out.append(table(sorted(report["checks"].items()), ("check", "verdict")))
    scalars = [(k, v) for k, v in report["result"].items() if not isinstance(v, (list, dict))]
    if scalars:
        out.append(table(scalars))
    nested = [(k, v) for k, v in report["result"].items() if isinstance(v, dict)]
    for key, sub in nested:
        rows = [(k, v) for k, v in sub.items()]
        if rows:
            out.append(f"[{key}]\n" + table(rows))
    for key, items in report["result"].items():
        if isinstance(items, list) and items and all(isinstance(i, dict) for i in items):
            cols = [c for c, v in items[0].items() if not isinstance(v, (list, dict))]
            if cols:
                out.append(f"[{key}]\n" + table([[i.get(c, "") for c in cols] for i in items], cols))
    return "\n\n".join(out) + "\n"
