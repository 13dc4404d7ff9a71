"""Sensor frustum, accessibility/collision oracles and visible-MP sets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Protocol, Sequence

import numpy as np

from .geometry import MeasurementPoint, TriangleMesh, sensor_frame, unit
from .uncertainty import SensorUncertaintyCurve, sensor_uncertainty_at

# Slack on the incident-angle gate so a sample placed exactly on the
# boundary cone is not lost to rounding.
ANGLE_EPS = 1e-12


@dataclass(frozen=True)
class SensorModel:
    """Line-scanner optics. FOV rectangles are (width, height) in mm.

    Defaults follow a Gocator-3210-class head: DOF 100, near 90 x 60,
    far 160 x 90, nominal depth 250, 5 s per scan.
    """

    near_fov: tuple = (90.0, 60.0)
    far_fov: tuple = (160.0, 90.0)
    dof: float = 100.0
    scan_depth: float = 250.0
    scan_time: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "near_fov", tuple(float(x) for x in self.near_fov))
        object.__setattr__(self, "far_fov", tuple(float(x) for x in self.far_fov))
        if not (self.near_fov[0] < self.far_fov[0] and self.near_fov[1] < self.far_fov[1]):
            raise ValueError("near FOV must be smaller than far FOV in both dimensions")
        if not self.dof > 0:
            raise ValueError("DOF must be positive")
        if not self.scan_depth - self.dof / 2 > 0:
            raise ValueError("near plane must lie in front of the sensor")

    @property
    def far_width(self) -> float:
        return self.far_fov[0]

    @property
    def near_depth(self) -> float:
        return self.scan_depth - self.dof / 2

    @property
    def far_depth(self) -> float:
        return self.scan_depth + self.dof / 2


@dataclass(frozen=True)
class Viewpoint:
    id: int
    position: tuple
    axis: tuple  # optical axis, pointing from the sensor toward the part
    roll: float = 0.0
    voxel_id: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(x) for x in self.position))
        a = tuple(float(x) for x in self.axis)
        if abs(math.sqrt(sum(x * x for x in a)) - 1.0) > 1e-9:
            raise ValueError(f"viewpoint {self.id}: axis is not unit length")
        object.__setattr__(self, "axis", a)
        object.__setattr__(self, "roll", float(self.roll))

    @property
    def p(self) -> np.ndarray:
        return np.array(self.position)

    @cached_property
    def frame(self) -> np.ndarray:
        return sensor_frame(self.axis, self.roll)


@dataclass(frozen=True)
class VisibleSet:
    viewpoint_id: int
    mp_ids: tuple
    angles: tuple
    u_sen: tuple

    @property
    def n(self) -> int:
        return len(self.mp_ids)

    def uncertainty(self) -> dict:
        return dict(zip(self.mp_ids, self.u_sen))

    def angle_of(self) -> dict:
        return dict(zip(self.mp_ids, self.angles))


# ---------------------------------------------------------------------------
# Frustum and incidence


def frustum_mask(sensor: SensorModel, vp: Viewpoint, points: np.ndarray) -> np.ndarray:
    """Vectorized :func:`frustum_contains` over an (n, 3) array."""
    local = (np.atleast_2d(points) - vp.p) @ vp.frame
    z = local[:, 2]
    t = (z - sensor.near_depth) / sensor.dof
    half_w = 0.5 * (sensor.near_fov[0] + t * (sensor.far_fov[0] - sensor.near_fov[0]))
    half_h = 0.5 * (sensor.near_fov[1] + t * (sensor.far_fov[1] - sensor.near_fov[1]))
    return (
        (z >= sensor.near_depth)
        & (z <= sensor.far_depth)
        & (np.abs(local[:, 0]) <= half_w)
        & (np.abs(local[:, 1]) <= half_h)
    )


def frustum_contains(sensor: SensorModel, vp: Viewpoint, p) -> bool:
    """True iff ``p`` is inside the truncated pyramid of measurable depth."""
    return bool(frustum_mask(sensor, vp, np.asarray(p, dtype=float))[0])


def _fold(cosines: np.ndarray) -> np.ndarray:
    # front and back incidence are treated alike; result lies in [0, pi/2]
    return np.arccos(np.clip(np.abs(cosines), 0.0, 1.0))


def incident_angles(vp: Viewpoint, positions: np.ndarray, normals: np.ndarray,
                    mode: str = "beam") -> np.ndarray:
    if mode == "beam":
        beams = vp.p - positions
        beams = beams / np.linalg.norm(beams, axis=1)[:, None]
        cos = np.einsum("ij,ij->i", beams, normals)
    elif mode == "axis":
        cos = normals @ np.asarray(vp.axis)
    else:
        raise ValueError(f"unknown incidence mode {mode!r}")
    return _fold(cos)


def incident_angle(vp: Viewpoint, mp: MeasurementPoint, mode: str = "beam") -> float:
    """Angle between the laser beam and the MP normal, in [0, pi/2].

    ``beam`` measures against the ray from the MP to the sensor origin;
    ``axis`` measures against the optical axis.
    """
    return float(incident_angles(vp, np.atleast_2d(mp.position), np.atleast_2d(mp.normal), mode)[0])


# ---------------------------------------------------------------------------
# Accessibility


class AccessibilityOracle(Protocol):
    def accessible(self, vp: Viewpoint) -> bool: ...


@dataclass(frozen=True)
class ShellConeOracle:
    """Reachability proxy: a spherical shell around the robot base plus a
    cone of admissible tool directions. Swap in a real IK check by
    implementing ``accessible``.
    """

    base: tuple = (0.0, 0.0, 0.0)
    r_min: float = 200.0
    r_max: float = 1300.0
    cone_axis: tuple = (0.0, 0.0, -1.0)
    cone_half_angle: float = math.radians(90.0)

    def __post_init__(self):
        if not 0 <= self.r_min < self.r_max:
            raise ValueError("need 0 <= r_min < r_max")
        object.__setattr__(self, "cone_axis", tuple(unit(self.cone_axis)))

    def accessible(self, vp: Viewpoint) -> bool:
        r = float(np.linalg.norm(vp.p - np.asarray(self.base)))
        if not self.r_min <= r <= self.r_max:
            return False
        c = float(np.dot(vp.axis, self.cone_axis))
        return c >= math.cos(self.cone_half_angle) - 1e-12


class AlwaysAccessible:
    def accessible(self, vp: Viewpoint) -> bool:
        return True


def robot_accessible(oracle: AccessibilityOracle, vp: Viewpoint) -> bool:
    return bool(oracle.accessible(vp))


# ---------------------------------------------------------------------------
# Collision


@dataclass(frozen=True)
class SensorBody:
    """Box around the scanner head in the sensor frame.

    ``size`` is (x, y, z) extent; the box centre sits ``offset`` mm behind
    the viewpoint along the optical axis. A scene triangle closer than
    ``clearance`` to the box counts as a collision; exactly ``clearance``
    away does not.
    """

    size: tuple = (100.0, 80.0, 150.0)
    offset: float = 75.0
    clearance: float = 20.0

    def __post_init__(self):
        object.__setattr__(self, "size", tuple(float(x) for x in self.size))
        if min(self.size) <= 0 or self.clearance < 0:
            raise ValueError("box size must be positive and clearance non-negative")

    def with_clearance(self, clearance: float) -> "SensorBody":
        return SensorBody(self.size, self.offset, clearance)

    def pose(self, position, frame: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        center = np.asarray(position, dtype=float) - self.offset * frame[:, 2]
        return center, frame


@dataclass(frozen=True, eq=False)
class Scene:
    """Static environment: the part plus any fixtures."""

    corners: np.ndarray
    lo: np.ndarray = field(init=False, repr=False)
    hi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = np.asarray(self.corners, dtype=float).reshape(-1, 3, 3)
        c.setflags(write=False)
        object.__setattr__(self, "corners", c)
        object.__setattr__(self, "lo", c.min(axis=1))
        object.__setattr__(self, "hi", c.max(axis=1))

    @classmethod
    def from_meshes(cls, *meshes: TriangleMesh) -> "Scene":
        if not meshes:
            return cls(np.empty((0, 3, 3)))
        return cls(np.concatenate([m.corners for m in meshes]))

    def __len__(self):
        return len(self.corners)


def box_hits_triangles(center: np.ndarray, frame: np.ndarray, half: np.ndarray,
                       corners: np.ndarray) -> np.ndarray:
    """Separating-axis overlap test of one oriented box against triangles.

    Returns a boolean per triangle. Touching counts as separated.
    """
    if len(corners) == 0:
        return np.zeros(0, dtype=bool)
    v = (corners - center) @ frame  # (m, 3, 3) in box coordinates
    e0 = v[:, 1] - v[:, 0]
    e1 = v[:, 2] - v[:, 1]
    e2 = v[:, 0] - v[:, 2]
    eye = np.eye(3)
    axes = [np.broadcast_to(eye[i], e0.shape) for i in range(3)]
    axes.append(np.cross(e0, e1))
    for e in (e0, e1, e2):
        for i in range(3):
            axes.append(np.cross(eye[i], e))
    hit = np.ones(len(v), dtype=bool)
    for ax in axes:
        p = np.einsum("mkj,mj->mk", v, ax)
        r = np.abs(ax) @ half
        usable = np.linalg.norm(ax, axis=1) > 1e-12
        sep = (p.min(axis=1) >= r) | (p.max(axis=1) <= -r)
        hit &= ~(sep & usable)
    return hit


def collides_at(scene: Scene, body: SensorBody, position, frame: np.ndarray) -> bool:
    if len(scene) == 0:
        return False
    center, rot = body.pose(position, frame)
    half = 0.5 * np.asarray(body.size) + body.clearance
    # bounding-sphere prefilter
    reach = float(np.linalg.norm(half))
    near = ((scene.lo <= center + reach) & (scene.hi >= center - reach)).all(axis=1)
    if not near.any():
        return False
    return bool(box_hits_triangles(center, rot, half, scene.corners[near]).any())


def collides(scene: Scene, body: SensorBody, vp: Viewpoint) -> bool:
    """True iff the posed sensor box, grown by the clearance, overlaps the scene."""
    return collides_at(scene, body, vp.p, vp.frame)


# ---------------------------------------------------------------------------
# Visible set


@dataclass(frozen=True, eq=False)
class MPTable:
    """Column view over an MP list, for vectorized gates."""

    ids: tuple
    positions: np.ndarray
    normals: np.ndarray

    @classmethod
    def from_mps(cls, mps: Sequence[MeasurementPoint]) -> "MPTable":
        return cls(
            tuple(mp.id for mp in mps),
            np.array([mp.position for mp in mps], dtype=float).reshape(-1, 3),
            np.array([mp.normal for mp in mps], dtype=float).reshape(-1, 3),
        )


@dataclass(frozen=True)
class VisibilityModel:
    sensor: SensorModel
    curve: SensorUncertaintyCurve
    scene: Scene
    body: SensorBody = SensorBody()
    oracle: AccessibilityOracle = field(default_factory=AlwaysAccessible)
    angle_mode: str = "beam"


def determination_set(vp: Viewpoint, mps, alpha_max: Mapping[str, float] | Sequence[float],
                      model: VisibilityModel) -> VisibleSet:
    """MPs measurable from ``vp`` within their incident-angle budget.

    Gates, in order: robot accessibility, collision, frustum membership,
    incident angle <= alpha_max. The first two are all-or-nothing.
    """
    table = mps if isinstance(mps, MPTable) else MPTable.from_mps(mps)
    empty = VisibleSet(vp.id, (), (), ())
    if not robot_accessible(model.oracle, vp):
        return empty
    if collides(model.scene, model.body, vp):
        return empty
    if not table.ids:
        return empty
    if isinstance(alpha_max, Mapping):
        limits = np.array([alpha_max[i] for i in table.ids], dtype=float)
    else:
        limits = np.asarray(alpha_max, dtype=float)
    inside = frustum_mask(model.sensor, vp, table.positions)
    idx = np.flatnonzero(inside)
    if len(idx) == 0:
        return empty
    ang = incident_angles(vp, table.positions[idx], table.normals[idx], model.angle_mode)
    ok = ang <= np.minimum(limits[idx], model.curve.alpha_limit) + ANGLE_EPS
    chosen = sorted(zip((table.ids[i] for i in idx[ok]), ang[ok]))
    return VisibleSet(
        vp.id,
        tuple(i for i, _ in chosen),
        tuple(float(a) for _, a in chosen),
        tuple(sensor_uncertainty_at(model.curve, min(float(a), model.curve.alpha_limit))
              for _, a in chosen),
    )
