"""Run reports and deterministic JSON output."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import IoError

VOLATILE_KEYS = ("timings",)


def to_plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-ready Python objects."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _encode(obj, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," + pad if indent else ","
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(k) + ": " + _encode(obj[k], indent, level + 1) for k in sorted(obj)]
        return "{" + pad + sep.join(items) + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, 0, 0) for v in obj) + "]"
        return "[" + pad + sep.join(_encode(v, indent, level + 1) for v in obj) + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        return "%.17g" % obj
    if isinstance(obj, int):
        return str(obj)
    return json.dumps(obj)


def dumps(obj, indent: int = 1) -> str:
    """JSON text with sorted keys and floats at 17 significant digits (non-finite as null)."""
    return _encode(to_plain(obj), indent, 0) + "\n"


def write_json(obj, path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps(obj))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def content_hash(payload: dict) -> str:
    """SHA-256 of the canonical encoding, ignoring wall-clock fields."""
    stable = {k: v for k, v in payload.items() if k not in VOLATILE_KEYS + ("report_hash",)}
    return hashlib.sha256(dumps(stable, indent=0).encode()).hexdigest()


@dataclass
class RunReport:
    scenario: str
    config_hash: str
    version: str
    stages: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    exit_code: int = 0

    def add_flag(self, flag: str) -> None:
        if flag not in self.flags:
            self.flags.append(flag)

    def to_dict(self) -> dict:
        body = to_plain({
            "scenario": self.scenario,
            "config_hash": self.config_hash,
            "software": {"name": "otgeo", "version": self.version},
            "stages": self.stages,
            "flags": sorted(self.flags),
            "timings": self.timings,
            "exit_code": self.exit_code,
        })
        body["report_hash"] = content_hash(body)
        return body

    @property
    def report_hash(self) -> str:
        return self.to_dict()["report_hash"]


def emit_report(report, path) -> None:
    """Write a :class:`RunReport` (or any JSON-ready mapping) to ``path``."""
    payload = report.to_dict() if isinstance(report, RunReport) else report
    write_json(payload, path)
