"""Initial candidate viewpoints per voxel.

For each voxel, poses are laid out on a grid over incident angle (rings
inside the MP's admissible cone), azimuth around the voxel normal, stand-off
depth and roll about the optical axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import IncompleteCoverageError, UncoverableVoxelError
from .geometry import MeasurementPoint, Voxel, any_perpendicular
from .visibility import (
    MPTable,
    Viewpoint,
    VisibilityModel,
    VisibleSet,
    determination_set,
)


@dataclass(frozen=True)
class CandidateGrid:
    rings: int = 3
    azimuths: int = 8
    depths: tuple | None = None  # None: nominal scan depth only
    rolls: tuple = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)

    def __post_init__(self):
        if self.rings < 1 or self.azimuths < 1 or not self.rolls:
            raise ValueError("grid needs at least one ring, azimuth and roll")

    def depth_samples(self, model: VisibilityModel) -> tuple:
        s = model.sensor
        if self.depths is None:
            return (s.scan_depth,)
        for d in self.depths:
            if not s.near_depth <= d <= s.far_depth:
                raise ValueError(f"depth {d} mm outside the DOF band")
        return tuple(float(d) for d in self.depths)

    @staticmethod
    def spread(model: VisibilityModel, n: int) -> tuple:
        """``n`` depths evenly across the DOF band."""
        s = model.sensor
        if n == 1:
            return (s.scan_depth,)
        return tuple(np.linspace(s.near_depth, s.far_depth, n).tolist())


@dataclass
class CandidateSet:
    viewpoints: list
    visible: dict = field(default_factory=dict)

    @property
    def covered(self) -> set:
        out = set()
        for vs in self.visible.values():
            out.update(vs.mp_ids)
        return out

    def by_id(self) -> dict:
        return {vp.id: vp for vp in self.viewpoints}


def cone_directions(normal, alpha_max: float, rings: int, azimuths: int) -> list:
    """Unit directions from the surface toward the sensor, within the cone.

    Ring angles are evenly spaced on [0, alpha_max]; the zero ring has a
    single azimuth.
    """
    n = np.asarray(normal, dtype=float)
    u = any_perpendicular(n)
    v = np.cross(n, u)
    out = []
    seen = set()
    for alpha in np.linspace(0.0, alpha_max, rings):
        alpha = float(alpha)
        if alpha in seen:
            continue
        seen.add(alpha)
        if alpha == 0.0:
            out.append((0.0, 0.0, n.copy()))
            continue
        for k in range(azimuths):
            phi = 2.0 * math.pi * k / azimuths
            d = math.cos(alpha) * n + math.sin(alpha) * (math.cos(phi) * u + math.sin(phi) * v)
            out.append((alpha, phi, d / np.linalg.norm(d)))
    return out


def generate_candidates(voxels: Sequence[Voxel], mps: Sequence[MeasurementPoint],
                        alpha_max: Mapping[str, float], model: VisibilityModel,
                        grid: CandidateGrid = CandidateGrid(), first_id: int = 0) -> CandidateSet:
    """Feasible candidate set with its visible sets already computed.

    A pose is kept only if it is reachable, collision-free and sees the MP
    of the voxel it was aimed at. A voxel left with no pose is fatal.
    """
    table = MPTable.from_mps(mps)
    depths = grid.depth_samples(model)
    viewpoints, visible = [], {}
    next_id = first_id
    for vox in voxels:
        kept = 0
        for _alpha, _phi, direction in cone_directions(
                vox.normal, alpha_max[vox.mp_id], grid.rings, grid.azimuths):
            for depth in depths:
                pos = np.asarray(vox.center) + depth * direction
                for roll in grid.rolls:
                    vp = Viewpoint(next_id, tuple(pos), tuple(-direction), roll, vox.id)
                    vs = determination_set(vp, table, alpha_max, model)
                    if vox.mp_id not in vs.mp_ids:
                        continue
                    viewpoints.append(vp)
                    visible[vp.id] = vs
                    next_id += 1
                    kept += 1
        if kept == 0:
            raise UncoverableVoxelError(
                f"voxel {vox.id} (MP {vox.mp_id}) has no feasible viewpoint",
                uncovered=(vox.mp_id,),
            )
    return CandidateSet(viewpoints, visible)


def cache_visible_sets(viewpoints: Sequence[Viewpoint], mps, alpha_max,
                       model: VisibilityModel) -> dict:
    if not viewpoints:
        raise ValueError("no candidate viewpoints")
    table = mps if isinstance(mps, MPTable) else MPTable.from_mps(mps)
    return {vp.id: determination_set(vp, table, alpha_max, model) for vp in viewpoints}


def check_coverage(visible: Mapping[int, VisibleSet], mp_ids) -> None:
    covered = set()
    for vs in visible.values():
        covered.update(vs.mp_ids)
    missing = sorted(set(mp_ids) - covered)
    if missing:
        raise IncompleteCoverageError(
            f"no candidate covers MP(s): {', '.join(missing)}", uncovered=missing
        )
