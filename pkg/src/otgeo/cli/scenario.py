"""Scenario files: schema, validation and construction of the model objects."""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from ..errors import ConfigInvalid, IoError
from ..geometry.costs import COST_KINDS, CostModel, make_cost
from ..geometry.densities import DENSITY_KINDS, DensityPair, make_density
from ..geometry.metrics import Geometry, build_geometry
from ..transport.measures import DiscreteMeasure, discretize

_BOX = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
}
_GRID = {"oneOf": [{"type": "integer", "minimum": 2},
                   {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1}]}
_DENSITY = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": list(DENSITY_KINDS)}, "params": {"type": "object"}},
    "additionalProperties": False,
}
_SIDE = {
    "type": "object",
    "required": ["box", "density"],
    "properties": {"box": _BOX, "density": _DENSITY, "grid": _GRID},
    "additionalProperties": False,
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "otgeo scenario",
    "type": "object",
    "required": ["dim", "cost", "source", "target"],
    "properties": {
        "name": {"type": "string"},
        "dim": {"type": "integer", "minimum": 1, "maximum": 3},
        "seed": {"type": "integer", "minimum": 0},
        "cost": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": list(COST_KINDS)},
                "params": {"type": "object"},
                "h": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
                "mode": {"enum": ["analytic", "fd"]},
                "fd_base": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "source": _SIDE,
        "target": _SIDE,
        "grid": _GRID,
        "solver": {
            "type": "object",
            "properties": {
                "method": {"enum": ["exact", "sinkhorn"]},
                "eps_schedule": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "eps_factor": {"type": "number", "exclusiveMinimum": 0},
                "max_iters": {"type": "integer", "minimum": 1},
                "tol": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "kappa": {
            "type": "object",
            "properties": {
                "grid": {"type": "integer", "minimum": 2},
                "n_rotations": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "stencil": {
            "type": "object",
            "properties": {"step": {"type": "number", "exclusiveMinimum": 0}},
            "additionalProperties": False,
        },
        "cutoff": {
            "type": "object",
            "required": ["center", "radius"],
            "properties": {
                "center": {"type": "array", "items": {"type": "number"}},
                "radius": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "probes": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}},
        "outputs": {
            "type": "object",
            "properties": {k: {"type": "string"} for k in ("report", "solution", "dump")},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


@dataclass
class Scenario:
    config: dict
    model: CostModel
    dens: DensityPair
    geometry: Geometry

    @property
    def dim(self) -> int:
        return self.model.dim

    @property
    def name(self) -> str:
        return self.config.get("name", "scenario")

    @property
    def seed(self) -> int:
        return int(self.config.get("seed", 0))

    def grid(self, side: str):
        cfg = self.config
        return cfg[side].get("grid", cfg.get("grid", 16))

    def measures(self) -> tuple[DiscreteMeasure, DiscreteMeasure]:
        return (discretize(self.dens.rho, grid=self.grid("source")),
                discretize(self.dens.rho_bar, grid=self.grid("target")))

    def eps_schedule(self, source: DiscreteMeasure) -> list[float]:
        solver = self.config.get("solver", {})
        if "eps_schedule" in solver:
            return list(solver["eps_schedule"])
        eps = solver.get("eps_factor", 1.0) * float(np.min(source.spacing)) ** 2
        return [e for e in (1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001, 3e-4, 1e-4) if e > eps] + [eps]

    def config_hash(self) -> str:
        return config_hash(self.config)


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def validate(config: dict) -> None:
    try:
        jsonschema.validate(config, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigInvalid(f"scenario invalid at {where}: {exc.message}") from exc
    n = config["dim"]
    for side in ("source", "target"):
        if len(config[side]["box"]) != n:
            raise ConfigInvalid(f"{side}.box must have {n} axes")
    for side in ("source", "target"):
        grid = config[side].get("grid", config.get("grid"))
        if isinstance(grid, list) and len(grid) != n:
            raise ConfigInvalid(f"{side} grid must list {n} resolutions")
    if "cutoff" in config and len(config["cutoff"]["center"]) != n:
        raise ConfigInvalid(f"cutoff.center must have {n} coordinates")
    for probe in config.get("probes", []):
        if len(probe) != n:
            raise ConfigInvalid(f"probe {probe} must have {n} grid indices")


def build_scenario(config: dict) -> Scenario:
    """Validate and instantiate; ``OTGEO_SEED`` in the environment overrides ``seed``."""
    config = copy.deepcopy(config)
    validate(config)
    if os.environ.get("OTGEO_SEED"):
        try:
            config["seed"] = int(os.environ["OTGEO_SEED"])
        except ValueError as exc:
            raise ConfigInvalid("OTGEO_SEED must be an integer") from exc
    n = config["dim"]
    c = config["cost"]
    model = make_cost(c["kind"], n, config["source"]["box"], config["target"]["box"],
                      h=c.get("h"), params=c.get("params"), mode=c.get("mode", "analytic"),
                      fd_base=c.get("fd_base", 1e-3))
    dens = DensityPair(
        make_density(config["source"]["density"]["kind"], config["source"]["box"],
                     config["source"]["density"].get("params")),
        make_density(config["target"]["density"]["kind"], config["target"]["box"],
                     config["target"]["density"].get("params")),
    )
    return Scenario(config, model, dens, build_geometry(model, dens))


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path} is not valid JSON: {exc}") from exc


def load_scenario(path) -> Scenario:
    return build_scenario(load_config(Path(path)))
