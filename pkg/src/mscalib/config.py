"""JSON run configuration: schema validation, defaults and object construction."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .harmonic import SectorHarmonicTriple, Symmetry


def load_schema() -> dict:
    text = resources.files("mscalib").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def _defaults(schema: dict) -> dict:
    out = {}
    for key, sub in schema.get("properties", {}).items():
        if "default" in sub:
            out[key] = copy.deepcopy(sub["default"])
        elif sub.get("type") == "object":
            out[key] = _defaults(sub)
    return out


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    data: dict

    def section(self, name: str) -> dict:
        return self.data.get(name, {})

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def overrides(self) -> dict:
        return dict(self.section("params"))

    def triple(self) -> SectorHarmonicTriple:
        t = self.section("triple")
        sym = Symmetry(t["symmetry"])
        if "coefficients" in t:
            ks = t.get("ks")
            if ks is None:
                raise ConfigError("triple.coefficients requires triple.ks")
            rows = t["coefficients"]
            if any(len(r) != len(ks) for r in rows):
                raise ConfigError("triple.coefficients rows must have one entry per k in triple.ks")
            signs = t.get("signs")
            if signs is None:
                signs = (1, -1, 1) if sym is Symmetry.ANTISYMMETRIC else (1, 1, 1)
            return SectorHarmonicTriple(sym, tuple(ks), rows, tuple(t["constants"]), tuple(signs))
        return SectorHarmonicTriple.from_modes(sym, [tuple(m) for m in t["modes"]],
                                               t["constants"], t.get("signs"))


def parse_config(payload: dict) -> RunConfig:
    schema = load_schema()
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(payload), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{where}: {e.message}")
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))
    return RunConfig(_merge(_defaults(schema), payload))


def load_config(path: str | Path | None) -> RunConfig:
    """Read and validate a config file; None gives the documented defaults."""
    if path is None:
        return parse_config({})
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return parse_config(payload)
