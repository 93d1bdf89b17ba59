"""Report bodies: JSON (sorted keys, no timestamps) and a plain-text digest."""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from symrigid import __version__


def _plain(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        # JSON has no inf/nan; keep them readable and loadable
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return x


def make_report(command: str, config: dict[str, Any], body: dict[str, Any], status: str) -> dict[str, Any]:
    """``status`` is ``pass``, ``fail``, ``refused`` (hypothesis) or ``error``."""
    return {
        "tool": f"symrigid {__version__}",
        "command": command,
        "config": config,
        "status": status,
        **body,
    }


def to_json(report: dict[str, Any]) -> str:
    return json.dumps(_plain(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.3e}"
    return str(v)


def _walk_checks(node: Any, prefix: str, out: list[str]) -> None:
    if isinstance(node, dict):
        if "check" in node and "residual" in node:
            mark = "ok  " if node.get("passed") else "FAIL"
            out.append(f"  [{mark}] {prefix}{node['check']}: residual {_fmt(node['residual'])} (tol {_fmt(node['tol'])})")
            return
        for k in sorted(node):
            _walk_checks(node[k], f"{prefix}{k}/" if k not in ("checks",) else prefix, out)
    elif isinstance(node, list):
        for v in node:
            _walk_checks(v, prefix, out)


def _text_lines(rep: dict[str, Any], indent: str) -> list[str]:
    lines = [f"{indent}{rep['command']}: {rep['status'].upper()}"]
    for key in ("verdict", "failing_clause", "refusal"):
        if key in rep:
            lines.append(f"{indent}  {key}: {rep[key]}")
    if "experiments" in rep:
        for name in sorted(rep["experiments"]):
            lines.append(f"{indent}  experiment {name}:")
            lines += _text_lines(rep["experiments"][name], indent + "    ")
        return lines
    cfg = rep.get("config", {})
    if cfg:
        lines.append(f"{indent}  config: " + ", ".join(f"{k}={cfg[k]}" for k in sorted(cfg)))
    checks: list[str] = []
    _walk_checks({k: v for k, v in rep.items() if k != "config"}, "", checks)
    lines += [indent + c for c in checks]
    for key in ("classification_summary", "moment_map"):
        if key in rep:
            val = rep[key]
            if isinstance(val, dict):
                for k in sorted(val):
                    items = val[k] if isinstance(val[k], list) else [val[k]]
                    for item in items:
                        lines.append(f"{indent}  {key} {k}: {item}")
    return lines


def to_text(report: dict[str, Any]) -> str:
    return "\n".join(_text_lines(_plain(report), "")) + "\n"
