"""Verification reports: a JSON record of inputs, residuals and pass/fail per sample."""

from __future__ import annotations

import datetime as _dt
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

SCHEMA_VERSION = "1.0"


def tool_version() -> str:
    from . import __version__
    return __version__


def to_jsonable(x):
    """Complex numbers become ``[re, im]``; arrays become nested lists; inf becomes a string."""
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x) or math.isinf(x):
            return str(x)
        return x
    return x


@dataclass
class SampleRecord:
    name: str
    inputs: dict
    residual_max: float
    residual_fro: float | None = None
    passed: bool = True
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "inputs": to_jsonable(self.inputs),
            "residual_max": to_jsonable(self.residual_max),
            "residual_fro": to_jsonable(self.residual_fro),
            "pass": bool(self.passed),
            "extra": to_jsonable(self.extra),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SampleRecord":
        return cls(d["name"], d["inputs"], _num(d["residual_max"]), _num(d.get("residual_fro")),
                   d["pass"], d.get("extra", {}))


def _num(v):
    if isinstance(v, str):
        return float(v)
    return v


@dataclass
class VerificationReport:
    kind: str
    algebra: str
    config: dict
    samples: list = field(default_factory=list)
    timestamp: str = ""
    tool_version: str = ""
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        if not self.timestamp:
            self.timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        if not self.tool_version:
            self.tool_version = tool_version()

    def add(self, record: SampleRecord) -> None:
        self.samples.append(record)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.samples)

    def worst(self) -> SampleRecord | None:
        finite = [s for s in self.samples if s.residual_max is not None]
        return max(finite, key=lambda s: s.residual_max, default=None)

    def to_dict(self) -> dict:
        w = self.worst()
        return {
            "schema_version": self.schema_version,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
            "kind": self.kind,
            "algebra": self.algebra,
            "config": to_jsonable(self.config),
            "samples": [s.to_dict() for s in self.samples],
            "worst": None if w is None else {"name": w.name, "residual_max": to_jsonable(w.residual_max),
                                             "inputs": to_jsonable(w.inputs)},
            "pass": self.passed,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        return cls(d["kind"], d["algebra"], d["config"], [SampleRecord.from_dict(s) for s in d["samples"]],
                   d["timestamp"], d["tool_version"], d["schema_version"])

    @classmethod
    def from_json(cls, text: str) -> "VerificationReport":
        return cls.from_dict(json.loads(text))

    def summary_lines(self) -> list:
        lines = []
        for s in self.samples:
            lines.append(f"{'PASS' if s.passed else 'FAIL'}  {s.name}  residual={s.residual_max:.3e}"
                         if isinstance(s.residual_max, float) else f"{'PASS' if s.passed else 'FAIL'}  {s.name}")
        w = self.worst()
        tail = f"; worst {w.name} ({w.residual_max:.3e})" if w is not None and isinstance(w.residual_max, float) else ""
        lines.append(f"{self.kind}: {'PASS' if self.passed else 'FAIL'} "
                     f"({sum(s.passed for s in self.samples)}/{len(self.samples)}){tail}")
        return lines


def load_schema() -> dict:
    return json.loads(resources.files("dynrmat").joinpath("report_schema.json").read_text())


def validate_report(doc: dict) -> None:
    """Validate against the bundled JSON schema (requires the optional ``jsonschema`` package)."""
    import jsonschema

    jsonschema.validate(doc, load_schema())

