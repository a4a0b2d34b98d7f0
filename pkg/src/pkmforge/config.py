"""Run configuration: JSON schema, validation, and object builders.

All physical quantities are SI: lengths in m, stiffness in N/m, moduli in
Pa, wrenches in N and N*m, masses in kg, drive forces in N, accelerations
in m/s^2.  Unknown keys are rejected so typos fail fast instead of being
silently ignored.
"""

from __future__ import annotations

import copy
import json

import jsonschema
import numpy as np

from .dynamics import DynamicSpec, InertiaModel
from .grid import GridSpec
from .kinematics import GeometryParams
from .stiffness import CrossSection, OrthoglideStiffnessModel, StiffnessSpec

SCHEMA_VERSION = 1


class ConfigError(Exception):
    """Configuration file is missing, malformed, or fails the schema."""


def _vec(n, minimum=None, exclusive_minimum=None):
    item = {"type": "number"}
    if minimum is not None:
        item["minimum"] = minimum
    if exclusive_minimum is not None:
        item["exclusiveMinimum"] = exclusive_minimum
    return {"type": "array", "items": item, "minItems": n, "maxItems": n}


_SECTION = {
    "type": "object",
    "additionalProperties": False,
    "required": ["width", "height", "elastic_modulus", "shear_modulus"],
    "properties": {
        "width": {"type": "number", "exclusiveMinimum": 0},
        "height": {"type": "number", "exclusiveMinimum": 0},
        "elastic_modulus": {"type": "number", "exclusiveMinimum": 0},
        "shear_modulus": {"type": "number", "exclusiveMinimum": 0},
    },
}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "geometry", "grid"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "seed": {"type": "integer", "minimum": 0},
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "required": ["leg_lengths", "joint_limits"],
            "properties": {
                "leg_lengths": _vec(3, exclusive_minimum=0),
                "joint_limits": {
                    "type": "array",
                    "items": _vec(2),
                    "minItems": 3,
                    "maxItems": 3,
                },
                "assembly_signs": {
                    "type": "array",
                    "items": {"enum": [-1, 1]},
                    "minItems": 3,
                    "maxItems": 3,
                },
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["origin", "proportions", "resolution", "dims"],
            "properties": {
                "origin": _vec(3),
                "proportions": _vec(3, exclusive_minimum=0),
                "resolution": {"type": "integer", "minimum": 1},
                "dims": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 2},
                    "minItems": 3,
                    "maxItems": 3,
                },
            },
        },
        "kinematic": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "cond_max": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "sigma_range": {"oneOf": [{"type": "null"}, _vec(2, exclusive_minimum=0)]},
            },
        },
        "stiffness": {
            "type": "object",
            "additionalProperties": False,
            "required": [
                "actuator_stiffness",
                "foot_section",
                "foot_length",
                "parallelogram_section",
                "load",
                "deflection_limit",
            ],
            "properties": {
                "actuator_stiffness": {"type": "number", "exclusiveMinimum": 0},
                "foot_section": _SECTION,
                "foot_length": {"type": "number", "exclusiveMinimum": 0},
                "parallelogram_section": _SECTION,
                "load": _vec(6),
                "deflection_limit": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "dynamics": {
            "type": "object",
            "additionalProperties": False,
            "required": ["joint_masses", "tcp_mass", "inertia_bound", "min_acceleration", "torque_limits"],
            "properties": {
                "joint_masses": _vec(3, exclusive_minimum=0),
                "tcp_mass": {"type": "number", "exclusiveMinimum": 0},
                "inertia_bound": {"type": "number", "exclusiveMinimum": 0},
                "min_acceleration": {"type": "number", "minimum": 0},
                "torque_limits": _vec(3, exclusive_minimum=0),
                "acceleration_mode": {"enum": ["ball", "max"]},
            },
        },
        "optimize": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {
                    "enum": [
                        "orthoglide",
                        "symmetric_quadratics",
                        "over_attained",
                        "linear_minimax",
                        "biobjective_front",
                    ]
                },
                "target": _vec(3, exclusive_minimum=0),
                "sigma_range": _vec(2, exclusive_minimum=0),
                "length_bounds": _vec(2, exclusive_minimum=0),
                "span_bounds": _vec(2, exclusive_minimum=0),
                "budget": {"type": "integer", "minimum": 1},
                "starts": {"type": "integer", "minimum": 1},
                "coarse_resolution": {"type": "integer", "minimum": 2},
                "fine_resolution": {"type": "integer", "minimum": 2},
                "pareto_weights": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                    "minItems": 1,
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {
                    "type": "array",
                    "items": {"enum": ["csv", "json"]},
                    "minItems": 1,
                },
            },
        },
    },
}

_DEFAULTS = {
    "seed": 20240101,
    "geometry": {"assembly_signs": [-1, -1, -1]},
    "kinematic": {"cond_max": 3.0, "sigma_range": None},
    "dynamics": {"acceleration_mode": "ball"},
    "optimize": {
        "preset": "orthoglide",
        "target": [1.0, 1.0, 0.8],
        "sigma_range": [0.5, 2.0],
        "length_bounds": [0.7, 3.0],
        "span_bounds": [0.4, 3.4],
        "budget": 900,
        "starts": 4,
        "coarse_resolution": 16,
        "fine_resolution": 64,
    },
    "output": {"directory": "out", "formats": ["csv", "json"]},
}


def default_config() -> dict:
    """A complete, runnable configuration for the symmetric reference design."""
    section = {"width": 0.025, "height": 0.025, "elastic_modulus": 7.0e10, "shear_modulus": 2.6e10}
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": 20240101,
        "geometry": {
            "leg_lengths": [1.0, 1.0, 1.0],
            "joint_limits": [[-1.9, -0.1], [-1.9, -0.1], [-1.9, -0.1]],
            "assembly_signs": [-1, -1, -1],
        },
        "grid": {
            "origin": [-0.75, -0.75, -0.75],
            "proportions": [1.0, 1.0, 1.0],
            "resolution": 32,
            "dims": [49, 49, 49],
        },
        "kinematic": {"cond_max": 3.0, "sigma_range": None},
        "stiffness": {
            "actuator_stiffness": 1.0e8,
            "foot_section": {**section, "width": 0.04, "height": 0.04},
            "foot_length": 0.15,
            "parallelogram_section": section,
            "load": [0.0, 200.0, 0.0, 0.0, 0.0, 60.0],
            "deflection_limit": 1.0e-4,
        },
        "dynamics": {
            "joint_masses": [15.0, 15.0, 15.0],
            "tcp_mass": 3.0,
            "inertia_bound": 40.0,
            "min_acceleration": 10.0,
            "torque_limits": [250.0, 250.0, 250.0],
            "acceleration_mode": "ball",
        },
        "optimize": dict(_DEFAULTS["optimize"]),
        "output": {"directory": "out", "formats": ["csv", "json"]},
    }


# sections that exist in every validated config, with defaults filled in;
# dynamics/stiffness stay absent unless configured (their commands require them)
_ALWAYS_PRESENT = ("kinematic", "optimize", "output")


def _merge_defaults(config: dict) -> dict:
    merged = copy.deepcopy(config)
    merged.setdefault("seed", _DEFAULTS["seed"])
    for key in ("geometry", "kinematic", "dynamics", "optimize", "output"):
        defaults = _DEFAULTS.get(key, {})
        if key in merged:
            base = dict(defaults)
            base.update(merged[key])
            merged[key] = base
        elif key in _ALWAYS_PRESENT:
            merged[key] = dict(defaults)
    return merged


def validate_config(config: dict) -> dict:
    """Schema-check a configuration dict and fill defaulted keys."""
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise ConfigError(f"config invalid at '{path}': {exc.message}") from exc
    return _merge_defaults(config)


def load_config(path) -> dict:
    try:
        with open(path) as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return validate_config(raw)


def require_section(config: dict, name: str) -> dict:
    section = config.get(name)
    if section is None:
        raise ConfigError(f"config section '{name}' is required for this command")
    return section


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def build_geometry(config: dict) -> GeometryParams:
    section = require_section(config, "geometry")
    return GeometryParams(
        leg_lengths=section["leg_lengths"],
        joint_limits=section["joint_limits"],
        assembly_signs=section.get("assembly_signs", [-1, -1, -1]),
    )


def build_grid(config: dict, resolution: int | None = None) -> GridSpec:
    """Grid from the config; an override resolution rescales the node counts
    so the Cartesian extent is preserved."""
    section = require_section(config, "grid")
    base_resolution = section["resolution"]
    dims = section["dims"]
    if resolution is not None and resolution != base_resolution:
        ratio = resolution / base_resolution
        dims = [int(round((d - 1) * ratio)) + 1 for d in dims]
    else:
        resolution = base_resolution
    return GridSpec(
        origin=section["origin"],
        proportions=section["proportions"],
        resolution=resolution,
        dims=dims,
    )


def build_stiffness(config: dict) -> tuple[OrthoglideStiffnessModel, StiffnessSpec]:
    section = require_section(config, "stiffness")
    geometry = build_geometry(config)

    def cross_section(sub):
        return CrossSection(
            width=sub["width"],
            height=sub["height"],
            elastic_modulus=sub["elastic_modulus"],
            shear_modulus=sub["shear_modulus"],
        )

    model = OrthoglideStiffnessModel(
        geometry=geometry,
        actuator_stiffness=section["actuator_stiffness"],
        foot_section=cross_section(section["foot_section"]),
        foot_length=section["foot_length"],
        parallelogram_section=cross_section(section["parallelogram_section"]),
    )
    spec = StiffnessSpec(load=np.asarray(section["load"]), deflection_limit=section["deflection_limit"])
    return model, spec


def build_dynamics(config: dict) -> tuple[InertiaModel, DynamicSpec]:
    section = require_section(config, "dynamics")
    model = InertiaModel(joint_masses=section["joint_masses"], tcp_mass=section["tcp_mass"])
    spec = DynamicSpec(
        inertia_bound=section["inertia_bound"],
        min_acceleration=section["min_acceleration"],
        torque_limits=section["torque_limits"],
        acceleration_mode=section.get("acceleration_mode", "ball"),
    )
    return model, spec
