"""Versioned JSON verdict reports.

Floats are written with 17 significant digits so every double round-trips
exactly; non-finite values become ``null``.  Key order is fixed, making the
output byte-for-byte reproducible.
"""
from __future__ import annotations

import json
import math

from .curvature import CheckReport

SCHEMA_VERSION = 1


def _number(v: float) -> str:
    if not math.isfinite(v):
        return "null"
    return format(v, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _number(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # keep short numeric vectors on one line
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return _encode(obj.item(), indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def check_report(report: CheckReport, *, input_sha256: str, mode: str,
                 m: float | None, eps_beta: float | None) -> dict:
    cfg = report.config
    return {
        "schema": SCHEMA_VERSION,
        "metadata": {
            "input_sha256": input_sha256,
            "seed": cfg.seed,
            "config": {
                "mode": mode,
                "m": m,
                "samples": cfg.samples,
                "tol_residual": cfg.tol_residual,
                "tol_k": cfg.tol_k,
                "s_window": list(cfg.s_window),
                "theta_guard": cfg.theta_guard,
                "eps_beta": eps_beta,
                "box": [list(b) for b in cfg.box],
            },
        },
        "samples": [
            {
                "index": r.index,
                "x": list(r.x),
                "y": list(r.y),
                "F": r.F,
                "K": r.K,
                "rel_residual": r.rel_residual,
                "flags": list(r.flags),
            }
            for r in report.rows
        ],
        "summary": {
            "verdict": report.verdict,
            "K_median": report.K_median,
            "K_spread": report.K_spread,
            "max_residual": report.max_residual,
            "n_samples": len(report.rows),
            "n_rejected": report.n_rejected,
        },
    }
