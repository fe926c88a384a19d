"""Scenario configuration: strict JSON configs resolved into meshes and
potentials.

All numeric defaults live in the JSON schema below, never in module logic;
unknown keys are always fatal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from .geometry import ConfigurationError, DiskDomain, Mesh, build_disk_mesh

_POTENTIAL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["profile"],
    "properties": {
        "profile": {"enum": ["zero", "gaussian", "radial_bump", "piecewise"]},
        "amplitude": {"type": "number", "default": 1.0},
        "center": {
            "type": "array",
            "items": {"type": "number"},
            "minItems": 2,
            "maxItems": 2,
            "default": [0.0, 0.0],
        },
        "width": {"type": "number", "exclusiveMinimum": 0.0, "default": 0.25},
        "pieces": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "number"},
                "minItems": 3,
                "maxItems": 3,
            },
            "default": [],
        },
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "calderon scenario",
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "seed"],
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer"},
        "resolution": {"type": "number", "exclusiveMinimum": 0.0, "default": 0.0175},
        "rho": {
            "description": "constant conformal log-factor, or a named profile",
            "oneOf": [{"type": "number"}, _POTENTIAL_SCHEMA],
            "default": 0.0,
        },
        "gamma0": {
            "description": "inaccessible arc [theta_a, theta_b]; null = full data",
            "oneOf": [
                {"type": "null"},
                {
                    "type": "array",
                    "items": {"type": "number"},
                    "minItems": 2,
                    "maxItems": 2,
                },
            ],
            "default": [0.0, 1.5707963267948966],
        },
        "v1": {**_POTENTIAL_SCHEMA, "default": {"profile": "gaussian", "amplitude": 1.0, "center": [0.2, 0.1], "width": 0.25}},
        "v2": {**_POTENTIAL_SCHEMA, "default": {"profile": "zero"}},
        "h_list": {
            "type": "array",
            "items": {"type": "number", "exclusiveMinimum": 0.0},
            "minItems": 1,
            "default": [0.2, 0.14, 0.1, 0.07, 0.05],
        },
        "degree": {"type": "integer", "minimum": 1, "default": 16},
        "phase_degree": {"type": "integer", "minimum": 4, "default": 36},
        "vanish_order": {"type": "integer", "minimum": 1, "default": 4},
        "epsilon": {"type": "number", "exclusiveMinimum": 0.0, "default": 0.1},
        "psi_target": {"type": "number", "exclusiveMinimum": 0.0, "default": 0.8},
        "cutoff_scale": {"type": "number", "exclusiveMinimum": 0.0, "default": 1.0},
        "point": {
            "description": "interior evaluation point for cgo/reconstruct",
            "type": "array",
            "items": {"type": "number"},
            "minItems": 2,
            "maxItems": 2,
            "default": [0.2, 0.1],
        },
        "theta_p": {"type": "number", "default": 3.141592653589793},
        "boundary_h_list": {
            "type": "array",
            "items": {"type": "number", "exclusiveMinimum": 0.0},
            "minItems": 2,
            "default": [0.15, 0.12, 0.1, 0.08, 0.06, 0.05],
        },
        "grid_n": {"type": "integer", "minimum": 1, "default": 7},
        "grid_radius": {"type": "number", "exclusiveMinimum": 0.0, "default": 0.6},
        "carleman_samples": {"type": "integer", "minimum": 1, "default": 50},
        "carleman_psi_target": {"type": "number", "exclusiveMinimum": 0.0, "default": 0.12},
        "cgo_regimes": {
            "description": "residual-scaling sweep settings; weak phases probe the completion remainder, strong phases the transport hierarchy",
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["psi_target", "cutoff_scale"],
                "properties": {
                    "psi_target": {"type": "number", "exclusiveMinimum": 0.0},
                    "cutoff_scale": {"type": "number", "exclusiveMinimum": 0.0},
                },
            },
            "default": [
                {"psi_target": 0.12, "cutoff_scale": 1.0},
                {"psi_target": 0.45, "cutoff_scale": 1.9},
            ],
        },
    },
}


def _apply_defaults(config: dict, schema: dict = SCHEMA) -> dict:
    out = dict(config)
    for key, sub in schema["properties"].items():
        if key not in out and "default" in sub:
            out[key] = json.loads(json.dumps(sub["default"]))
    for key in ("v1", "v2"):
        spec = out.get(key)
        if isinstance(spec, dict):
            for pkey, psub in _POTENTIAL_SCHEMA["properties"].items():
                if pkey not in spec and "default" in psub:
                    spec[pkey] = json.loads(json.dumps(psub["default"]))
    return out


def validate_config(config: dict) -> dict:
    """Strictly validate; unknown keys are fatal and named in the error."""
    if not isinstance(config, dict):
        raise ConfigurationError("scenario config must be a JSON object")
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = []
        for e in errors:
            loc = ".".join(str(x) for x in e.absolute_path) or "<root>"
            msgs.append(f"{loc}: {e.message}")
        raise ConfigurationError("invalid scenario config: " + "; ".join(msgs))
    return _apply_defaults(config)


def make_potential(spec):
    """Resolve a potential description into a vectorized callable (or 0.0)."""
    if spec is None or spec["profile"] == "zero":
        return 0.0
    amp = float(spec.get("amplitude", 1.0))
    cx, cy = spec.get("center", [0.0, 0.0])
    c = complex(cx, cy)
    w = float(spec.get("width", 0.25))
    if spec["profile"] == "gaussian":
        return lambda z: amp * np.exp(-np.abs(np.asarray(z) - c) ** 2 / w**2)
    if spec["profile"] == "radial_bump":
        def bump(z):
            t = np.abs(np.asarray(z) - c) / w
            out = np.zeros(np.shape(t))
            inside = t < 1.0
            out[inside] = amp * np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
            return out
        return bump
    if spec["profile"] == "piecewise":
        pieces = spec.get("pieces", [])
        def steps(z):
            r = np.abs(np.asarray(z))
            out = np.zeros(np.shape(r))
            for r0, r1, val in pieces:
                out[(r >= r0) & (r < r1)] = val
            return out
        return steps
    raise ConfigurationError(f"unknown potential profile {spec['profile']!r}")


def make_rho(spec):
    """Conformal log-factor: constant or named profile."""
    if isinstance(spec, (int, float)):
        if spec == 0.0:
            return None
        return lambda z: np.full(np.shape(np.asarray(z)), float(spec))
    f = make_potential(spec)
    return None if f == 0.0 else f


@dataclass
class Scenario:
    """A validated config resolved into domain, potentials, and parameters."""

    config: dict
    domain: DiskDomain
    V1: object
    V2: object
    mesh: Mesh = None
    extras: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.config["name"]

    @property
    def seed(self) -> int:
        return int(self.config["seed"])

    @property
    def h_list(self) -> list:
        return [float(h) for h in self.config["h_list"]]

    @property
    def point(self) -> complex:
        x, y = self.config["point"]
        return complex(x, y)

    def build_mesh(self) -> Mesh:
        if self.mesh is None:
            self.mesh = build_disk_mesh(float(self.config["resolution"]), self.domain)
        return self.mesh


def load_scenario(source) -> Scenario:
    """Build a Scenario from a config path, JSON text, or dict."""
    if isinstance(source, dict):
        config = source
    else:
        text = source if str(source).lstrip().startswith("{") else open(source).read()
        try:
            config = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    config = validate_config(config)
    gamma0 = config["gamma0"]
    domain = DiskDomain(
        conformal_log_factor=make_rho(config["rho"]),
        gamma0=None if gamma0 is None else (float(gamma0[0]), float(gamma0[1])),
    )
    return Scenario(
        config=config,
        domain=domain,
        V1=make_potential(config["v1"]),
        V2=make_potential(config["v2"]),
    )


def reference_config(**overrides) -> dict:
    """The reference scenario (all schema defaults) with optional overrides."""
    cfg = {"name": "reference", "seed": 0}
    cfg.update(overrides)
    return validate_config(cfg)
