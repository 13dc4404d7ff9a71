"""Planner configuration: a YAML file merged over built-in defaults.

Angles are given in degrees in the file and converted to radians here.
Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import copy
import math
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "strategy": "rrt",
    "part": {"mesh": None, "mps": None, "obstacles": []},
    "sensor": {
        "near_fov": [90.0, 60.0],
        "far_fov": [160.0, 90.0],
        "dof": 100.0,
        "scan_depth": 250.0,
        "scan_time": 5.0,
        "body": {"size": [100.0, 80.0, 150.0], "offset": 75.0, "clearance": 20.0},
    },
    "uncertainty": {
        "k": 2.0,
        "u_mat": 0.01,
        "u_rot": 0.01,
        "curve_deg": [[0, 0.04], [20, 0.05], [40, 0.07], [60, 0.10], [75, 0.19]],
    },
    # half-widths of the tolerance band; the interval T is twice this
    "tolerance_pm": {"hole": 0.5, "slot": 0.5, "trimming": 0.7, "surface": 1.0},
    "voxel": {"edge": 40.0},
    "candidates": {
        "rings": 3,
        "azimuths": 8,
        "depths": 1,
        "rolls_deg": [0, 90, 180, 270],
    },
    "accessibility": {
        "base": None,  # default: below the part centre
        "r_min": 100.0,
        "r_max": 1500.0,
        "cone_axis": [0.0, 0.0, -1.0],
        "cone_half_angle_deg": 90.0,
    },
    "home": {"position": None, "axis": [0.0, 0.0, -1.0]},
    "sampler": {
        "beta1": 1.0,
        "gamma1": 0.05,
        "beta2": 1.0,
        "gamma2": -0.02,
        "spacing": None,  # default: far-FOV width
        "radius": None,  # default: 2 * spacing
        "max_iter": 2000,
        "refresh_before_extend": False,
        "angle_mode": "beam",
    },
    "baseline": {"gates": False},
    "robot": {"v_lin": 100.0, "v_ang_deg": 60.0, "detour_iters": 4000, "detour_step": 60.0},
    "sa": {"cooling": 0.995, "iters_per_node": 200, "restarts": 3},
    "report": {"bins": [0.04, 0.07, 0.10, 0.13, 0.16, 0.19]},
    "output": {"dir": "out"},
}

STRATEGIES = ("rrt", "baseline")


def deep_merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in (extra or {}).items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict) and base[key] is not None:
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where} must be a mapping")
            out[key] = deep_merge(base[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_override(text: str) -> tuple[list[str], Any]:
    if "=" not in text:
        raise ConfigError(f"override must look like key.path=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"bad override value {raw!r}: {exc}") from exc
    return key.strip().split("."), value


class Config:
    def __init__(self, data: dict, base_dir: Path | str = "."):
        self.data = deep_merge(DEFAULTS, data)
        self.base_dir = Path(base_dir)

    @classmethod
    def load(cls, path, overrides=()) -> "Config":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        cfg = cls(raw, path.parent)
        for ov in overrides:
            cfg.set(*parse_override(ov))
        return cfg

    def set(self, keys: list[str], value) -> None:
        node, ref = self.data, DEFAULTS
        for k in keys[:-1]:
            if k not in ref or not isinstance(ref[k], dict):
                raise ConfigError(f"unknown config key: {'.'.join(keys)}")
            node, ref = node[k], ref[k]
        if keys[-1] not in ref:
            raise ConfigError(f"unknown config key: {'.'.join(keys)}")
        node[keys[-1]] = value

    def __getitem__(self, key):
        return self.data[key]

    def path(self, value) -> Path | None:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def output_dir(self) -> Path:
        return self.path(self.data["output"]["dir"])

    def validate(self) -> None:
        """Cheap structural checks; the pipeline does the rest."""
        d = self.data
        if d["strategy"] not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        for key in ("mesh", "mps"):
            p = self.path(d["part"][key])
            if p is None:
                raise ConfigError(f"part.{key} is required")
            if not p.exists():
                raise ConfigError(f"part.{key} not found: {p}")
        for p in d["part"]["obstacles"] or []:
            if not self.path(p).exists():
                raise ConfigError(f"obstacle mesh not found: {p}")
        bins = d["report"]["bins"]
        if len(bins) < 2 or any(b <= a for a, b in zip(bins, bins[1:])):
            raise ConfigError("report.bins must be at least two increasing edges")
        try:
            int(d["seed"])
        except (TypeError, ValueError) as exc:
            raise ConfigError("seed must be an integer") from exc

    def tolerance_interval(self, kind: str) -> float:
        return 2.0 * float(self.data["tolerance_pm"][kind])

    @staticmethod
    def radians(deg) -> float:
        return math.radians(float(deg))
