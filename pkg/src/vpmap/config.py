"""Run configuration: one JSON document, validated against a versioned schema
before any computation. Unknown keys are rejected at every level."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import jsonschema

from .errors import ConfigError, ElicitationError
from .graph import AdjacencyGraph, lattice_graph, read_graph
from .inference import McmcConfig
from .model import ModelSpec
from .priors import PriorSpec, TauPCPrior, UniformPrior, prior_from_declaration
from .simulation import PRIOR_CHOICES, SCENARIO_GAMMA, SIZE_FACTOR

SCHEMA_VERSION = 1
COMMANDS = ("fit", "simulate", "verify-prior", "scale")

_prob = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}
_pos_int = {"type": "integer", "minimum": 1}

_prior = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"type": {"const": "pc"}, "U": {"type": "number", "exclusiveMinimum": 0}, "a": _prob},
            "required": ["type", "U", "a"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"type": {"const": "uniform"}},
            "required": ["type"],
            "additionalProperties": False,
        },
    ]
}

_lattice = {
    "type": "object",
    "properties": {"rows": _pos_int, "cols": _pos_int},
    "required": ["rows", "cols"],
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "vpmap run configuration",
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "model": {
            "type": "object",
            "properties": {
                "family": {"enum": ["binomial", "poisson"]},
                "temporal_order": {"enum": [1, 2]},
                "interaction_type": {"enum": ["I", "II", "III", "IV"]},
                "include_iid_main": {"type": "boolean"},
                "n_times": {"type": "integer", "minimum": 2},
                "max_dim": _pos_int,
            },
            "required": ["interaction_type"],
            "additionalProperties": False,
        },
        "priors": {
            "type": "object",
            "properties": {k: _prior for k in ("gamma", "tau", "phi", "psi1", "psi2")},
            "additionalProperties": False,
        },
        "mcmc": {
            "type": "object",
            "properties": {
                "n_iterations": _pos_int,
                "burn_in": {"type": "integer", "minimum": 0},
                "thin": _pos_int,
                "n_chains": _pos_int,
                "seed": {"type": "integer", "minimum": 0},
                "latent_thin": _pos_int,
                "centered_moves": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "data": {
            "type": "object",
            "properties": {
                "counts": {"type": "string", "minLength": 1},
                "graph": {"type": "string", "minLength": 1},
                "lattice": _lattice,
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {"directory": {"type": "string", "minLength": 1}},
            "additionalProperties": False,
        },
        "simulate": {
            "type": "object",
            "properties": {
                "scenarios": {"type": "array", "items": {"enum": list(SCENARIO_GAMMA)}, "minItems": 1, "uniqueItems": True},
                "size_levels": {"type": "array", "items": {"enum": list(SIZE_FACTOR)}, "minItems": 1, "uniqueItems": True},
                "priors": {"type": "array", "items": {"enum": list(PRIOR_CHOICES)}, "minItems": 1, "uniqueItems": True},
                "replicates": _pos_int,
                "base_effects": {"type": "string", "minLength": 1},
                "n_times": {"type": "integer", "minimum": 2},
                "lattice": _lattice,
                "alpha": {"type": "number"},
                "base_population": {"type": "number", "exclusiveMinimum": 0},
                "base_seed": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "verify_prior": {
            "type": "object",
            "properties": {
                "types": {"type": "array", "items": {"enum": ["I", "II", "III", "IV"]}, "minItems": 1, "uniqueItems": True},
                "n1": {"type": "integer", "minimum": 2},
                "n2": {"type": "integer", "minimum": 2},
                "orders": {"type": "array", "items": {"enum": [1, 2]}, "minItems": 1, "uniqueItems": True},
                "iid": {"type": "array", "items": {"type": "boolean"}, "minItems": 1, "uniqueItems": True},
                "psi": {"type": "array", "items": _prob, "minItems": 2, "maxItems": 2},
                "phi": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "gamma0": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-4},
                "grid": {"type": "array", "items": _prob, "minItems": 2},
                "scaled": {"type": "boolean"},
                "graph": {"type": "string", "minLength": 1},
            },
            "additionalProperties": False,
        },
        "scale": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["rw1", "rw2", "icar"]},
                "n": {"type": "integer", "minimum": 1},
                "graph": {"type": "string", "minLength": 1},
                "lattice": _lattice,
                "dump_matrix": {"type": "boolean"},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
    },
    "required": ["schema_version"],
    "additionalProperties": False,
}

REQUIRED_SECTIONS = {
    "fit": ("model", "data"),
    "simulate": (),
    "verify-prior": (),
    "scale": ("scale",),
}


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    sha256: str
    base_dir: Path

    def section(self, name: str) -> dict:
        return self.raw.get(name, {})

    def path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def output_dir(self, override: Optional[str] = None) -> Path:
        if override:
            return Path(override)
        d = self.section("output").get("directory")
        return self.path(d) if d else Path("vpmap-out")

    def mcmc(self, seed: Optional[int] = None) -> McmcConfig:
        opts = dict(self.section("mcmc"))
        if seed is not None:
            opts["seed"] = seed
        try:
            return McmcConfig(**opts)
        except ValueError as exc:
            raise ConfigError(f"mcmc: {exc}") from None

    def graph(self, section: str = "data") -> AdjacencyGraph:
        sec = self.section(section)
        if "graph" in sec and "lattice" in sec:
            raise ConfigError(f"{section}: give either graph or lattice, not both")
        if "graph" in sec:
            return read_graph(self.path(sec["graph"]))
        if "lattice" in sec:
            return lattice_graph(sec["lattice"]["rows"], sec["lattice"]["cols"])
        raise ConfigError(f"{section}: a graph file or lattice is required")

    def model_spec(self, graph: AdjacencyGraph, n_times: int) -> ModelSpec:
        m = self.section("model")
        return ModelSpec(
            family=m.get("family", "binomial"),
            temporal_order=m.get("temporal_order", 1),
            interaction_type=m["interaction_type"],
            include_iid_main=m.get("include_iid_main", False),
            n1=n_times,
            graph=graph,
            **({"max_dim": m["max_dim"]} if "max_dim" in m else {}),
        )

    def priors(self, include_iid: bool) -> PriorSpec:
        decl = self.section("priors")
        gamma = prior_from_declaration(decl.get("gamma", {"type": "pc", "U": 0.5, "a": 0.99}), "gamma")
        tau = prior_from_declaration(decl.get("tau", {"type": "pc", "U": 1 / 0.31, "a": 0.01}), "tau")
        if not isinstance(tau, TauPCPrior):
            raise ElicitationError("tau needs a PC prior")
        other = {}
        for name in ("phi", "psi1", "psi2"):
            if name in decl:
                other[name] = prior_from_declaration(decl[name], name)
            elif name == "phi" or include_iid:
                other[name] = UniformPrior()
            else:
                other[name] = None
        if not include_iid and ("psi1" in decl or "psi2" in decl):
            raise ConfigError("psi priors given but the model has no iid main effects")
        return PriorSpec(gamma=gamma, tau=tau, **other)


def validate(raw, command: Optional[str] = None) -> None:
    """Raise ConfigError naming the first offending key path."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {e.message}")
    if command is not None:
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        missing = [s for s in REQUIRED_SECTIONS[command] if s not in raw]
        if missing:
            raise ConfigError(f"{command} needs config sections {missing}")
        if command == "fit" and "counts" not in raw["data"]:
            raise ConfigError("fit needs data/counts")
        mc = raw.get("mcmc", {})
        if "burn_in" in mc and mc["burn_in"] >= mc.get("n_iterations", McmcConfig.n_iterations):
            raise ConfigError("mcmc/burn_in must be smaller than n_iterations")
        # elicitation problems surface here, before any sampling
        for name, decl in raw.get("priors", {}).items():
            prior_from_declaration(decl, name)


def load_config(path, command: Optional[str] = None) -> RunConfig:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = json.loads(blob)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    validate(raw, command)
    return RunConfig(raw, hashlib.sha256(blob).hexdigest(), path.resolve().parent)
