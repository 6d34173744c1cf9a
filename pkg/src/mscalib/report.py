"""Result containers shared by the checks and the command line."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = "1.0"


def _clean(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


@dataclass
class ConditionResult:
    name: str
    passed: bool
    margin: float
    tolerance: float
    samples: int
    witness: dict | None = None
    details: dict = field(default_factory=dict)
    # per-sample rows for CSV output; not part of the JSON report
    table: list | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return _clean({
            "pass": self.passed,
            "margin": self.margin,
            "tolerance": self.tolerance,
            "samples": self.samples,
            "witness": self.witness,
            "details": self.details,
        })


@dataclass
class OracleEntry:
    name: str
    computed: float
    expected: float
    tolerance: float
    kind: str = "relative"   # "relative", "absolute" or "sign"
    in_acceptance: bool = True
    note: str = ""

    @property
    def error(self) -> float:
        if self.kind == "sign":
            return 0.0 if np.sign(self.computed) == np.sign(self.expected) else 1.0
        diff = abs(self.computed - self.expected)
        if self.kind == "relative":
            return diff / abs(self.expected)
        return diff

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tolerance)

    def to_dict(self) -> dict:
        return _clean({
            "computed": self.computed, "expected": self.expected,
            "error": self.error, "tolerance": self.tolerance, "kind": self.kind,
            "pass": self.passed, "in_acceptance": self.in_acceptance, "note": self.note,
        })


@dataclass
class VerificationReport:
    params: dict
    triple: dict
    conditions: dict = field(default_factory=dict)
    oracles: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok = all(c.passed for c in self.conditions.values())
        return ok and all(o.passed for o in self.oracles.values() if o.in_acceptance)

    def to_dict(self) -> dict:
        return _clean({
            "schema_version": SCHEMA_VERSION,
            "pass": self.passed,
            "u_radius": self.params.get("u_radius"),
            "params": self.params,
            "triple": self.triple,
            "conditions": {k: v.to_dict() for k, v in self.conditions.items()},
            "oracles": {k: v.to_dict() for k, v in self.oracles.items()},
            "extra": self.extra,
        })

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)
