"""JSON run configuration: schema, line-aware validation and canonical serialization.

A configuration looks like::

    {
      "model": {"rho": 0.05, "mu": 0.1},
      "altered": {"rho": 0.05, "mu": 0.28},
      "contract": {"maturity": 5, "rate": 0, "periods_per_year": 4},
      "tranches": "standard",
      "mc": {"paths": 1000000, "seed": 1}
    }

Intensities are given as ``rho`` and jump sizes either as ``mu`` (mean size)
or ``lam`` (rate). The canonical form spells out every default, writes
``lam`` and lists tranches explicitly, so parsing it back gives the same
configuration.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import jsonschema

from .model import STANDARD_TRANCHES, Contract, DomainError, LossSpec, ModelParams, Tranche
from .montecarlo import SimConfig

PRESETS = {"standard": STANDARD_TRANCHES}

_PARAMS = {
    "type": "object",
    "properties": {
        "rho": {"type": "number", "exclusiveMinimum": 0},
        "lam": {"type": "number", "exclusiveMinimum": 0},
        "mu": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["rho"],
    "oneOf": [{"required": ["lam"]}, {"required": ["mu"]}],
    "additionalProperties": False,
}

_POSITIVE_LIST = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}

SCHEMA = {
    "type": "object",
    "properties": {
        "model": _PARAMS,
        "altered": _PARAMS,
        "contract": {
            "type": "object",
            "properties": {
                "maturity": {"type": "number", "minimum": 0},
                "rate": {"type": "number", "minimum": 0},
                "periods_per_year": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "tranches": {
            "oneOf": [
                {"type": "string", "enum": sorted(PRESETS)},
                {"type": "array",
                 "items": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1},
                           "minItems": 2, "maxItems": 2}},
            ]
        },
        "loss_spec": {"type": "string", "enum": [s.value for s in LossSpec]},
        "mc": {
            "type": "object",
            "properties": {
                "paths": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
                "chunk_size": {"type": "integer", "minimum": 1},
                "threads": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "sweep": {
            "type": "object",
            "properties": {
                "axis": {"type": "string", "enum": ["mu_alt", "rho_alt"]},
                "values": _POSITIVE_LIST,
            },
            "additionalProperties": False,
        },
        "map": {
            "type": "object",
            "properties": {
                "rho_ratios": _POSITIVE_LIST,
                "mu_ratios": _POSITIVE_LIST,
                "paths": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "timing": {
            "type": "object",
            "properties": {
                "rho_values": _POSITIVE_LIST,
                "paths": {"type": "integer", "minimum": 1},
                "repeats": {"type": "integer", "minimum": 1},
                "c": {"type": "number", "minimum": 0},
                "b": {"type": "number", "minimum": 0},
            },
            "dependentRequired": {"c": ["b"], "b": ["c"]},
            "additionalProperties": False,
        },
        "outputs": {
            "type": "object",
            "properties": {
                "dir": {"type": "string"},
                "format": {"type": "string", "enum": ["csv", "tsv"]},
            },
            "additionalProperties": False,
        },
    },
    "required": ["model"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the source line when known."""


@dataclass(frozen=True)
class SweepSpec:
    axis: str = "mu_alt"
    values: tuple = (0.05, 0.1, 0.15, 0.2, 0.25, 0.28, 0.3, 0.35, 0.4, 0.5, 0.6, 0.8, 1.0)


@dataclass(frozen=True)
class MapSpec:
    rho_ratios: tuple = tuple(float(k) for k in range(1, 11))
    mu_ratios: tuple = tuple(float(k) for k in range(1, 11))
    paths: int = 100_000


@dataclass(frozen=True)
class TimingSpec:
    rho_values: tuple = (0.05, 0.5, 1.0, 2.0, 4.0, 6.0)
    paths: int = 1_000_000
    repeats: int = 3
    c: float | None = None
    b: float | None = None


@dataclass(frozen=True)
class RunConfig:
    real: ModelParams
    altered: ModelParams
    contract: Contract = Contract()
    tranches: tuple = STANDARD_TRANCHES
    loss_spec: LossSpec = LossSpec.EXPONENTIAL
    paths: int = 100_000
    seed: int = 0
    chunk_size: int = 1 << 16
    threads: int = 1
    sweep: SweepSpec = field(default_factory=SweepSpec)
    map: MapSpec = field(default_factory=MapSpec)
    timing: TimingSpec = field(default_factory=TimingSpec)
    out_dir: str = "."
    fmt: str = "tsv"

    def sim_config(self, **overrides) -> SimConfig:
        cfg = SimConfig(self.real, self.altered, self.contract, self.tranches, n_paths=self.paths,
                        seed=self.seed, chunk_size=self.chunk_size, loss_spec=self.loss_spec,
                        threads=self.threads)
        return replace(cfg, **overrides) if overrides else cfg


# ------------------------------------------------------------ locating lines

def _locate(text: str) -> dict:
    """Map each JSON path (tuple of keys/indices) to the line where its value starts."""
    dec = json.JSONDecoder()
    lines = {}

    def line_of(pos):
        return text.count("\n", 0, pos) + 1

    def skip(pos):
        while pos < len(text) and text[pos] in " \t\r\n":
            pos += 1
        return pos

    def value(pos, path):
        pos = skip(pos)
        lines[path] = line_of(pos)
        ch = text[pos]
        if ch == "{":
            pos = skip(pos + 1)
            if text[pos] == "}":
                return pos + 1
            while True:
                key, pos = dec.raw_decode(text, skip(pos))
                lines.setdefault(path + (key,), line_of(pos))
                pos = skip(pos)
                pos = value(pos + 1, path + (key,))  # past ':'
                pos = skip(pos)
                if text[pos] == "}":
                    return pos + 1
                pos += 1  # ','
        if ch == "[":
            pos = skip(pos + 1)
            if text[pos] == "]":
                return pos + 1
            i = 0
            while True:
                pos = skip(value(pos, path + (i,)))
                if text[pos] == "]":
                    return pos + 1
                pos += 1
                i += 1
        _, end = dec.raw_decode(text, pos)
        return end

    value(0, ())
    return lines


def _where(source: str, lines: dict, path) -> str:
    path = tuple(path)
    while path and path not in lines:
        path = path[:-1]
    line = lines.get(path, 1)
    dotted = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in path).lstrip(".")
    return f"{source}:{line}: {dotted or '<root>'}"


# ------------------------------------------------------------------- parsing

def _params(d: dict) -> ModelParams:
    if "lam" in d:
        return ModelParams(d["rho"], d["lam"])
    return ModelParams.from_mu(d["rho"], d["mu"])


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate a JSON configuration document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    lines = _locate(text)
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        raise ConfigError(f"{_where(source, lines, err.absolute_path)}: {err.message}")
    return from_dict(doc, source, lines)


def from_dict(doc: dict, source: str = "<config>", lines: dict | None = None) -> RunConfig:
    lines = lines or {}

    def build(path, fn, *args):
        try:
            return fn(*args)
        except (DomainError, ValueError) as exc:
            raise ConfigError(f"{_where(source, lines, path)}: {exc}") from None

    real = build(("model",), _params, doc["model"])
    altered = build(("altered",), _params, doc["altered"]) if "altered" in doc else real
    contract = build(("contract",), lambda: Contract(**{
        k: doc.get("contract", {})[k] for k in doc.get("contract", {})}))
    tr_doc = doc.get("tranches", "standard")
    if isinstance(tr_doc, str):
        tranches = PRESETS[tr_doc]
    else:
        tranches = tuple(build(("tranches", i), Tranche, float(a), float(d))
                         for i, (a, d) in enumerate(tr_doc))
    mc = doc.get("mc", {})
    sw = doc.get("sweep", {})
    mp = doc.get("map", {})
    tm = doc.get("timing", {})
    out = doc.get("outputs", {})
    return RunConfig(
        real=real, altered=altered, contract=contract, tranches=tranches,
        loss_spec=LossSpec(doc.get("loss_spec", LossSpec.EXPONENTIAL.value)),
        paths=mc.get("paths", 100_000), seed=mc.get("seed", 0),
        chunk_size=mc.get("chunk_size", 1 << 16), threads=mc.get("threads", 1),
        sweep=SweepSpec(sw.get("axis", SweepSpec.axis),
                        tuple(float(v) for v in sw.get("values", SweepSpec.values))),
        map=MapSpec(tuple(float(v) for v in mp.get("rho_ratios", MapSpec.rho_ratios)),
                    tuple(float(v) for v in mp.get("mu_ratios", MapSpec.mu_ratios)),
                    mp.get("paths", MapSpec.paths)),
        timing=TimingSpec(tuple(float(v) for v in tm.get("rho_values", TimingSpec.rho_values)),
                          tm.get("paths", TimingSpec.paths), tm.get("repeats", TimingSpec.repeats),
                          tm.get("c"), tm.get("b")),
        out_dir=out.get("dir", "."), fmt=out.get("format", "tsv"),
    )


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read: {exc.strerror}") from None
    return parse_config(text, path)


def to_dict(cfg: RunConfig) -> dict:
    """Canonical form: every field explicit, tranches listed, jump sizes as ``lam``."""
    timing = {"rho_values": list(cfg.timing.rho_values), "paths": cfg.timing.paths,
              "repeats": cfg.timing.repeats}
    if cfg.timing.c is not None:
        timing.update(c=cfg.timing.c, b=cfg.timing.b)
    return {
        "model": {"rho": cfg.real.rho, "lam": cfg.real.lam},
        "altered": {"rho": cfg.altered.rho, "lam": cfg.altered.lam},
        "contract": {"maturity": cfg.contract.maturity, "rate": cfg.contract.rate,
                     "periods_per_year": cfg.contract.periods_per_year},
        "tranches": [[t.a, t.d] for t in cfg.tranches],
        "loss_spec": cfg.loss_spec.value,
        "mc": {"paths": cfg.paths, "seed": cfg.seed, "chunk_size": cfg.chunk_size,
               "threads": cfg.threads},
        "sweep": {"axis": cfg.sweep.axis, "values": list(cfg.sweep.values)},
        "map": {"rho_ratios": list(cfg.map.rho_ratios), "mu_ratios": list(cfg.map.mu_ratios),
                "paths": cfg.map.paths},
        "timing": timing,
        "outputs": {"dir": cfg.out_dir, "format": cfg.fmt},
    }


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2)
