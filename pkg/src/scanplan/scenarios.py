"""Synthetic parts for tests, demos and the acceptance suite.

Each builder returns a :class:`Scenario`; ``write`` drops the mesh, the MP
file and a config into a directory so the CLI can run on it.

    python -m scanplan.scenarios random --seed 3 out/part3
"""

from __future__ import annotations

import argparse
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

from .geometry import MeasurementPoint, TriangleMesh, save_mps, save_stl


@dataclass
class Scenario:
    name: str
    mesh: TriangleMesh
    mps: list
    config: dict = field(default_factory=dict)
    obstacles: list = field(default_factory=list)

    def write(self, directory, **overrides) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        save_stl(self.mesh, directory / "part.stl")
        save_mps(self.mps, directory / "mps.csv")
        obstacles = []
        for i, ob in enumerate(self.obstacles):
            name = f"obstacle{i}.stl"
            save_stl(ob, directory / name)
            obstacles.append(name)
        cfg = _merge(self.config, overrides)
        cfg.setdefault("part", {})
        cfg["part"].update({"mesh": "part.stl", "mps": "mps.csv", "obstacles": obstacles})
        cfg.setdefault("output", {"dir": "out"})
        path = directory / "config.yaml"
        path.write_text(yaml.safe_dump(cfg, sort_keys=True))
        return path


def _merge(a: dict, b: dict) -> dict:
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in a.items()}
    for k, v in b.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def heightfield(width: float, depth: float, nx: int, ny: int,
                height: Callable | None = None, origin=(0.0, 0.0)) -> TriangleMesh:
    xs = origin[0] + np.linspace(0.0, width, nx + 1)
    ys = origin[1] + np.linspace(0.0, depth, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    gz = np.zeros_like(gx) if height is None else height(gx, gy)
    verts = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    tris = []
    for i in range(nx):
        for j in range(ny):
            a = i * (ny + 1) + j
            b = (i + 1) * (ny + 1) + j
            tris.append([a, b, b + 1])
            tris.append([a, b + 1, a + 1])
    return TriangleMesh(verts, np.array(tris))


def box_mesh(lo, hi) -> TriangleMesh:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    v = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    # outward winding
    faces = [
        [0, 1, 3], [0, 3, 2],  # x = lo
        [4, 6, 7], [4, 7, 5],  # x = hi
        [0, 4, 5], [0, 5, 1],  # y = lo
        [2, 3, 7], [2, 7, 6],  # y = hi
        [0, 2, 6], [0, 6, 4],  # z = lo
        [1, 5, 7], [1, 7, 3],  # z = hi
    ]
    return TriangleMesh(v, np.array(faces))


def surface_point(mesh: TriangleMesh, x: float, y: float):
    """Point and normal on an upward-facing mesh straight below (x, y)."""
    c = mesh.corners
    a, b, d = c[:, 0, :2], c[:, 1, :2], c[:, 2, :2]
    p = np.array([x, y])
    v0, v1, v2 = b - a, d - a, p - a
    den = v0[:, 0] * v1[:, 1] - v1[:, 0] * v0[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (v2[:, 0] * v1[:, 1] - v1[:, 0] * v2[:, 1]) / den
        t = (v0[:, 0] * v2[:, 1] - v2[:, 0] * v0[:, 1]) / den
    inside = (s >= -1e-12) & (t >= -1e-12) & (s + t <= 1 + 1e-12) & (mesh.normals[:, 2] > 0)
    hits = np.flatnonzero(inside)
    if len(hits) == 0:
        raise ValueError(f"no upward surface under ({x}, {y})")
    i = int(hits[np.argmax(c[hits, :, 2].mean(axis=1))])
    z = c[i, 0, 2] + s[i] * (c[i, 1, 2] - c[i, 0, 2]) + t[i] * (c[i, 2, 2] - c[i, 0, 2])
    return (float(x), float(y), float(z)), tuple(mesh.normals[i])


def grid_mps(mesh: TriangleMesh, spacing: float, kind: str = "surface", tolerance: float = 2.0,
             prefix: str = "s") -> list:
    """One MP at the centre of every ``spacing`` cell over the mesh footprint."""
    lo, hi = mesh.bounds
    nx = int(round((hi[0] - lo[0]) / spacing))
    ny = int(round((hi[1] - lo[1]) / spacing))
    out = []
    for i in range(nx):
        for j in range(ny):
            x = lo[0] + (i + 0.5) * spacing
            y = lo[1] + (j + 0.5) * spacing
            p, n = surface_point(mesh, x, y)
            out.append(MeasurementPoint(f"{prefix}{i:02d}_{j:02d}", p, n, kind, tolerance))
    return out


BASE_CONFIG = {
    "seed": 0,
    "voxel": {"edge": 40.0},
    "candidates": {"rings": 4, "azimuths": 8, "depths": 3, "rolls_deg": [0, 90]},
    # small parts: spacing of one voxel keeps the tree from exhausting candidates
    "sampler": {"max_iter": 2000, "spacing": 40.0},
}


def flat_plate(width: float = 240.0, depth: float = 80.0, spacing: float = 40.0) -> Scenario:
    """Plate of surface points; every MP meets its budget from any candidate."""
    mesh = heightfield(width, depth, int(width // 20), int(depth // 20))
    mps = grid_mps(mesh, spacing)
    return Scenario("flat_plate", mesh, mps, _merge(BASE_CONFIG, {"voxel": {"edge": spacing}}))


def tight_plate(width: float = 320.0, depth: float = 80.0, spacing: float = 40.0,
                hole_tolerance: float = 0.72) -> Scenario:
    """Plate of loose surface points with two tight holes.

    The holes' tolerance interval leaves an incident-angle budget of a few
    degrees, so only near-normal views measure them compliantly.
    """
    mesh = heightfield(width, depth, int(width // 20), int(depth // 20))
    mps = grid_mps(mesh, spacing)
    tight = {"s01_00": "h0", "s06_01": "h1"}
    out = []
    for mp in mps:
        if mp.id in tight:
            out.append(MeasurementPoint(tight[mp.id], mp.position, mp.normal, "hole",
                                        hole_tolerance, critical=True))
        else:
            out.append(mp)
    return Scenario("tight_plate", mesh, out, _merge(BASE_CONFIG, {"voxel": {"edge": spacing}}))


KIND_TOLERANCE = {"hole": 1.0, "slot": 1.0, "trimming": 1.4, "surface": 2.0}


def random_part(seed: int, size=(200.0, 120.0), spacing: float = 40.0,
                bumps: int = 3, amplitude: float = 12.0) -> Scenario:
    """Gently curved heightfield with a random mix of MP kinds."""
    rng = np.random.default_rng(seed)
    w, d = size
    centres = rng.uniform([0, 0], [w, d], size=(bumps, 2))
    heights = rng.uniform(-amplitude, amplitude, size=bumps)
    widths = rng.uniform(0.35, 0.6, size=bumps) * max(w, d)

    def height(x, y):
        z = np.zeros_like(x)
        for (cx, cy), h, s in zip(centres, heights, widths):
            z = z + h * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * s * s))
        return z

    mesh = heightfield(w, d, int(w // 10), int(d // 10), height)
    base = grid_mps(mesh, spacing)
    kinds = rng.choice(["hole", "slot", "trimming", "surface", "surface"], size=len(base))
    mps = [
        MeasurementPoint(mp.id, mp.position, mp.normal, str(k), KIND_TOLERANCE[str(k)],
                         critical=str(k) != "surface")
        for mp, k in zip(base, kinds)
    ]
    return Scenario(f"random_{seed}", mesh, mps,
                    _merge(BASE_CONFIG, {"seed": seed, "voxel": {"edge": spacing}}))


def fixture_plate(width: float = 240.0, depth: float = 80.0) -> Scenario:
    """Flat plate with a tall clamp block in the middle of one long edge."""
    sc = flat_plate(width, depth)
    block = box_mesh((width / 2 - 15, depth + 10, 0.0), (width / 2 + 15, depth + 40, 180.0))
    sc.obstacles.append(block)
    sc.name = "fixture_plate"
    return sc


BUILDERS = {
    "flat": lambda a: flat_plate(),
    "tight": lambda a: tight_plate(),
    "fixture": lambda a: fixture_plate(),
    "random": lambda a: random_part(a.seed),
}


def main(argv=None):
    ap = argparse.ArgumentParser(prog="python -m scanplan.scenarios",
                                 description="Write a synthetic part, MP file and config.")
    ap.add_argument("kind", choices=sorted(BUILDERS))
    ap.add_argument("directory")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    path = BUILDERS[args.kind](args).write(args.directory)
    print(path)


if __name__ == "__main__":
    main()
