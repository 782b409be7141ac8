"""Run configuration (schema-validated YAML) and experiment manifests."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import yaml

from .geometry import TorusGeometry
from .kernels import (
    KernelSpec,
    bernoulli_kernel,
    cosine_kernel,
    kernel_from_text,
    riesz_kernel,
    zero_kernel,
)
from .potentials import make_potential

TOOL_VERSION = "torusgas 0.1.0"

_NUM = {"type": "number"}
_INT = {"type": "integer"}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["torus", "kernel", "potential", "theta"],
    "properties": {
        "torus": {
            "type": "object",
            "additionalProperties": False,
            "required": ["dim", "side", "resolution"],
            "properties": {"dim": _INT, "side": _NUM, "resolution": _INT},
        },
        "kernel": {
            "type": "object",
            "additionalProperties": False,
            "required": ["form"],
            "properties": {
                "form": {"enum": ["zero", "cosine", "riesz", "bernoulli",
                                  "file"]},
                "amplitude": _NUM,
                "mode": _INT,
                "order": _INT,
                "s": _NUM,
                "image_radius": _INT,
                "path": {"type": "string"},
            },
        },
        "potential": {
            "type": "object",
            "additionalProperties": False,
            "required": ["form"],
            "properties": {
                "form": {"enum": ["zero", "cosine", "double_well", "bernoulli",
                                  "file"]},
                "amplitude": _NUM,
                "mode": _INT,
                "order": _INT,
                "path": {"type": "string"},
            },
        },
        "theta": _NUM,
        "seed": _INT,
        "particles": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": _INT,
                "n_list": {"type": "array", "items": _INT},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"tol": _NUM, "max_iterations": _INT,
                           "damping": _NUM},
        },
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "burn_in": _INT, "thin": _INT, "n_samples": _INT,
                "proposal_scale": _NUM, "target_acceptance": _NUM,
            },
        },
        "field": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"window_radius": _NUM, "m_tags": _INT},
        },
        "entropy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "box_side": _NUM, "cell_side": _NUM, "n_windows": _INT,
                "window_intensity": _NUM, "reference_intensity": _NUM,
                "window_side": _NUM,
            },
        },
        "split": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_configs": _INT, "n_particles": _INT,
                "refinement": {"type": "array", "items": _INT},
                "refinement_potential_order": _INT,
            },
        },
        "rate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "delta": _NUM, "quantile": _NUM, "samples_per_n": _INT,
                "pilot_samples": _INT, "dictionary_size": _INT,
                "n_list": {"type": "array", "items": _INT},
            },
        },
        "minimize": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"restarts": _INT, "n": _INT,
                           "proxy_theta": _NUM},
        },
        "thresholds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "el_residual": _NUM,
                "split_relative_residual": _NUM,
                "partition_g0": _NUM,
                "entropy_relative_error": _NUM,
                "rate_bound": _NUM,
                "minimize_relative_gap": _NUM,
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "format": {"enum": ["csv", "ndjson"]},
                "plot": {"type": "boolean"},
            },
        },
    },
}

DEFAULTS = {
    "seed": 0,
    "particles": {"n": 64, "n_list": [1, 2, 3, 4]},
    "solver": {"tol": 1e-12, "max_iterations": 50000, "damping": 0.5},
    "sampler": {"burn_in": 200, "thin": 2, "n_samples": 200,
                "target_acceptance": 0.3},
    "field": {"window_radius": 8.0, "m_tags": 64},
    "entropy": {"box_side": 4.0, "cell_side": 0.5, "n_windows": 10000,
                "window_intensity": 2.0, "reference_intensity": 1.0,
                "window_side": 6.0},
    "split": {"n_configs": 100, "n_particles": 32,
              "refinement": [32, 64, 128], "refinement_potential_order": 6},
    "rate": {"quantile": 0.6, "samples_per_n": 400, "pilot_samples": 100,
             "dictionary_size": 256},
    "minimize": {"restarts": 8, "proxy_theta": 1.0e4},
    "thresholds": {"el_residual": 1e-7, "split_relative_residual": 1e-6,
                   "partition_g0": 1e-9, "entropy_relative_error": 0.15,
                   "rate_bound": 0.1, "minimize_relative_gap": 0.05},
    "output": {"directory": "out", "format": "csv", "plot": True},
}


class ConfigError(ValueError):
    """Configuration file failed schema validation."""


@dataclass
class RunConfig:
    raw: dict
    path: str = "<inline>"

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            doc = yaml.safe_load(fh)
        return cls.from_dict(doc or {}, path=str(path))

    @classmethod
    def from_dict(cls, doc: dict, path: str = "<inline>") -> "RunConfig":
        try:
            jsonschema.validate(doc, CONFIG_SCHEMA)
        except jsonschema.ValidationError as err:
            raise ConfigError(f"invalid config: {err.message}") from err
        merged = {}
        for key, default in DEFAULTS.items():
            if isinstance(default, dict):
                merged[key] = {**default, **doc.get(key, {})}
            else:
                merged[key] = doc.get(key, default)
        for key in ("torus", "kernel", "potential", "theta"):
            merged[key] = doc[key]
        return cls(raw=merged, path=path)

    def __getitem__(self, key):
        return self.raw[key]

    def geometry(self, resolution=None) -> TorusGeometry:
        t = self.raw["torus"]
        return TorusGeometry(int(t["dim"]), float(t["side"]),
                             int(resolution or t["resolution"]))

    def kernel(self, geom=None) -> KernelSpec:
        geom = geom or self.geometry()
        spec = dict(self.raw["kernel"])
        form = spec.pop("form")
        if form == "zero":
            return zero_kernel(geom)
        if form == "cosine":
            return cosine_kernel(geom, amplitude=spec.get("amplitude", 1.0),
                                 mode=spec.get("mode", 1))
        if form == "riesz":
            return riesz_kernel(geom, s=spec["s"],
                                image_radius=spec.get("image_radius", 3))
        if form == "bernoulli":
            return bernoulli_kernel(geom, order=spec.get("order", 4),
                                    amplitude=spec.get("amplitude", 1.0))
        return kernel_from_text(spec["path"])

    def potential(self, geom=None):
        geom = geom or self.geometry()
        spec = dict(self.raw["potential"])
        form = spec.pop("form")
        return make_potential(geom, form, **spec)

    def digest(self) -> str:
        return sha256_text(json.dumps(self.raw, sort_keys=True))

    def theta(self) -> float:
        return float(self.raw["theta"])


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class ExperimentManifest:
    command: str
    config_digest: str
    seed: int
    tool_version: str = TOOL_VERSION
    config: dict = field(default_factory=dict)  # embedded for replayability
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    started: str = ""
    finished: str = ""
    passed: bool = True

    @staticmethod
    def now() -> str:
        return datetime.now(timezone.utc).isoformat()

    def add_input(self, path) -> None:
        self.inputs.append({"path": str(path), "sha256": sha256_file(path)})

    def add_output(self, path) -> None:
        self.outputs.append({"path": str(path), "sha256": sha256_file(path)})

    def write(self, path) -> None:
        doc = {
            "command": self.command,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "started": self.started,
            "finished": self.finished,
            "pass": self.passed,
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")

    @staticmethod
    def read(path) -> dict:
        return json.loads(Path(path).read_text())


def write_csv(path, header: list, rows: list) -> None:
    """Plain CSV with repr-formatted floats for byte-stable replays."""
    import numpy as np
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for value in row:
            if isinstance(value, (float, np.floating)):
                cells.append(repr(float(value)))
            elif isinstance(value, (bool, np.bool_)):
                cells.append(str(bool(value)))
            elif isinstance(value, np.integer):
                cells.append(str(int(value)))
            else:
                cells.append(str(value))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")
