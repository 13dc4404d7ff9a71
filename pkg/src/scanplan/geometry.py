"""Mesh ingestion, surface voxelization and small vector helpers.

All lengths are millimetres, all angles radians.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateGeometryError,
    EdgeTooLargeError,
    MeshError,
    VoxelizationError,
)

NORMAL_TOL = 1e-9
MIN_VOXEL_EDGE = 0.01
CHORDAL_FRACTION = 0.05
MP_KINDS = ("hole", "slot", "trimming", "surface")


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def any_perpendicular(axis) -> np.ndarray:
    """A fixed unit vector perpendicular to ``axis``.

    Uses world X projected onto the plane normal to ``axis`` (world Y when
    the axis is close to X), so the result is stable for a given axis.
    """
    axis = unit(axis)
    ref = np.array([1.0, 0.0, 0.0])
    if abs(axis @ ref) > 0.9:
        ref = np.array([0.0, 1.0, 0.0])
    return unit(ref - (ref @ axis) * axis)


def sensor_frame(axis, roll: float) -> np.ndarray:
    """Rotation matrix whose columns are the sensor x, y, z axes.

    z is the optical axis; x is :func:`any_perpendicular` rotated by
    ``roll`` about z.
    """
    z = unit(axis)
    x0 = any_perpendicular(z)
    y0 = np.cross(z, x0)
    c, s = math.cos(roll), math.sin(roll)
    x = c * x0 + s * y0
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def rotation_angle(ra: np.ndarray, rb: np.ndarray) -> float:
    """Geodesic angle between two rotation matrices."""
    c = (np.trace(ra.T @ rb) - 1.0) / 2.0
    return float(math.acos(min(1.0, max(-1.0, c))))


# ---------------------------------------------------------------------------
# Mesh


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray = field(init=False, repr=False)
    areas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must be (n, 3), got {v.shape}")
        if t.ndim != 2 or t.shape[1] != 3 or len(t) == 0:
            raise MeshError("mesh has no triangles")
        if t.min() < 0 or t.max() >= len(v):
            bad = int(np.flatnonzero((t < 0).any(1) | (t >= len(v)).any(1))[0])
            raise MeshError(f"triangle {bad} references a missing vertex")
        a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        cr = np.cross(b - a, c - a)
        twice_area = np.linalg.norm(cr, axis=1)
        scale = np.maximum(
            np.linalg.norm(b - a, axis=1) * np.linalg.norm(c - a, axis=1), 1e-300
        )
        degenerate = twice_area <= 1e-12 * scale
        if degenerate.any():
            idx = int(np.flatnonzero(degenerate)[0])
            raise DegenerateGeometryError(
                f"triangle {idx} has zero area", index=idx
            )
        v.setflags(write=False)
        t.setflags(write=False)
        normals = cr / twice_area[:, None]
        normals.setflags(write=False)
        areas = 0.5 * twice_area
        areas.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "areas", areas)

    @property
    def corners(self) -> np.ndarray:
        """(m, 3, 3) array of triangle corner coordinates."""
        return self.vertices[self.triangles]

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def __len__(self):
        return len(self.triangles)

    @classmethod
    def merge(cls, meshes: Iterable["TriangleMesh"]) -> "TriangleMesh":
        verts, tris, offset = [], [], 0
        for m in meshes:
            verts.append(m.vertices)
            tris.append(m.triangles + offset)
            offset += len(m.vertices)
        return cls(np.vstack(verts), np.vstack(tris))


def _parse_ascii_stl(text: str) -> np.ndarray:
    pts = []
    for line in text.splitlines():
        parts = line.split()
        if parts and parts[0] == "vertex":
            if len(parts) != 4:
                raise MeshError(f"malformed vertex line: {line.strip()!r}")
            pts.append([float(x) for x in parts[1:]])
    if not pts or len(pts) % 3:
        raise MeshError("ASCII STL has no complete facets")
    return np.asarray(pts, dtype=float).reshape(-1, 3, 3)


def _parse_binary_stl(data: bytes) -> np.ndarray:
    if len(data) < 84:
        raise MeshError("binary STL is truncated")
    (count,) = struct.unpack_from("<I", data, 80)
    if len(data) < 84 + 50 * count:
        raise MeshError("binary STL is truncated")
    rec = np.dtype(
        [("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")]
    )
    arr = np.frombuffer(data, dtype=rec, count=count, offset=84)
    return arr["v"].astype(float)


def _weld(corners: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    flat = corners.reshape(-1, 3)
    verts, inverse = np.unique(flat, axis=0, return_inverse=True)
    return verts, inverse.reshape(-1, 3)


def _parse_obj(text: str) -> tuple[np.ndarray, np.ndarray]:
    verts, faces = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = []
            for tok in parts[1:]:
                i = int(tok.split("/")[0])
                idx.append(i - 1 if i > 0 else len(verts) + i)
            if len(idx) < 3:
                raise MeshError(f"line {lineno}: face with fewer than 3 vertices")
            # fan-triangulate polygons
            for k in range(1, len(idx) - 1):
                faces.append([idx[0], idx[k], idx[k + 1]])
    if not faces:
        raise MeshError("OBJ file has no faces")
    return np.asarray(verts, dtype=float), np.asarray(faces, dtype=np.int64)


def load_mesh(path) -> TriangleMesh:
    """Read an STL (ASCII or binary) or OBJ file.

    Normals stored in the file are ignored and recomputed from the winding.
    """
    path = Path(path)
    if not path.exists():
        raise MeshError(f"mesh file not found: {path}")
    data = path.read_bytes()
    suffix = path.suffix.lower()
    try:
        if suffix == ".obj":
            v, t = _parse_obj(data.decode("utf-8", errors="replace"))
            return TriangleMesh(v, t)
        if suffix != ".stl":
            raise MeshError(f"unsupported mesh format: {suffix or path.name}")
        is_ascii = data.lstrip()[:5].lower() == b"solid" and b"facet" in data[:1024]
        if len(data) >= 84:
            (count,) = struct.unpack_from("<I", data, 80)
            if len(data) == 84 + 50 * count:
                is_ascii = False
        if is_ascii:
            corners = _parse_ascii_stl(data.decode("ascii", errors="replace"))
        else:
            corners = _parse_binary_stl(data)
    except (ValueError, UnicodeError, struct.error) as exc:
        raise MeshError(f"cannot parse {path}: {exc}") from exc
    return TriangleMesh(*_weld(corners))


def _num(x) -> str:
    return repr(float(x))


def save_stl(mesh: TriangleMesh, path, binary: bool = False) -> None:
    path = Path(path)
    corners = mesh.corners
    if binary:
        rec = np.zeros(
            len(corners),
            dtype=[("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")],
        )
        rec["n"] = mesh.normals
        rec["v"] = corners
        with path.open("wb") as fh:
            fh.write(b"scanplan".ljust(80, b" "))
            fh.write(struct.pack("<I", len(rec)))
            fh.write(rec.tobytes())
        return
    lines = ["solid scanplan"]
    for n, tri in zip(mesh.normals, corners):
        lines.append(f"  facet normal {_num(n[0])} {_num(n[1])} {_num(n[2])}")
        lines.append("    outer loop")
        for p in tri:
            lines.append(f"      vertex {_num(p[0])} {_num(p[1])} {_num(p[2])}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append("endsolid scanplan")
    path.write_text("\n".join(lines) + "\n")


def save_obj(mesh: TriangleMesh, path) -> None:
    lines = [f"v {_num(x)} {_num(y)} {_num(z)}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Measurement points


@dataclass(frozen=True)
class MeasurementPoint:
    id: str
    position: tuple
    normal: tuple
    kind: str
    tolerance: float  # tolerance interval T, mm
    critical: bool = False

    def __post_init__(self):
        pos = tuple(float(x) for x in self.position)
        nrm = tuple(float(x) for x in self.normal)
        if len(pos) != 3 or len(nrm) != 3:
            raise ValueError(f"MP {self.id}: position and normal need 3 components")
        if abs(math.sqrt(sum(x * x for x in nrm)) - 1.0) > NORMAL_TOL:
            raise ValueError(f"MP {self.id}: normal is not unit length")
        if not self.tolerance > 0:
            raise ValueError(f"MP {self.id}: tolerance must be positive")
        if self.kind not in MP_KINDS:
            raise ValueError(f"MP {self.id}: unknown kind {self.kind!r}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "normal", nrm)
        object.__setattr__(self, "id", str(self.id))

    @property
    def p(self) -> np.ndarray:
        return np.array(self.position)

    @property
    def n(self) -> np.ndarray:
        return np.array(self.normal)


MP_FIELDS = ("id", "x", "y", "z", "nx", "ny", "nz", "kind", "tolerance_mm", "critical")


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "y"):
        return True
    if t in ("0", "false", "no", "n", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def load_mps(path, default_tolerance: dict | None = None) -> list[MeasurementPoint]:
    """Read MP records from a CSV file with columns :data:`MP_FIELDS`.

    An empty ``tolerance_mm`` falls back to ``default_tolerance[kind]``.
    Normals are renormalized on read so hand-typed files need not be exact.
    """
    path = Path(path)
    if not path.exists():
        raise MeshError(f"MP file not found: {path}")
    mps = []
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        return mps
    header = [h.strip() for h in rows[0]]
    if tuple(header) != MP_FIELDS:
        raise MeshError(f"{path}: expected header {','.join(MP_FIELDS)}")
    seen = set()
    for lineno, row in enumerate(rows[1:], 2):
        rec = dict(zip(header, (c.strip() for c in row)))
        try:
            kind = rec["kind"]
            tol = rec["tolerance_mm"]
            if tol:
                tolerance = float(tol)
            elif default_tolerance and kind in default_tolerance:
                tolerance = float(default_tolerance[kind])
            else:
                raise ValueError(f"no tolerance for kind {kind!r}")
            normal = unit([float(rec[k]) for k in ("nx", "ny", "nz")])
            mp = MeasurementPoint(
                id=rec["id"],
                position=[float(rec[k]) for k in ("x", "y", "z")],
                normal=normal,
                kind=kind,
                tolerance=tolerance,
                critical=_parse_bool(rec["critical"]),
            )
        except (KeyError, ValueError) as exc:
            raise MeshError(f"{path}:{lineno}: {exc}") from exc
        if mp.id in seen:
            raise MeshError(f"{path}:{lineno}: duplicate MP id {mp.id}")
        seen.add(mp.id)
        mps.append(mp)
    return mps


def save_mps(mps: Sequence[MeasurementPoint], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MP_FIELDS)
        for mp in mps:
            w.writerow(
                [mp.id, *map(_num, mp.position), *map(_num, mp.normal),
                 mp.kind, _num(mp.tolerance), int(mp.critical)]
            )


# ---------------------------------------------------------------------------
# Distances


def min_distance_point_to_line(a, b, p) -> float:
    """Distance from ``p`` to the infinite line through ``a`` and ``b``.

    Triangle-area route: with side lengths d1 = |a-b|, d2 = |a-p|,
    d3 = |b-p| the area S comes from Heron's formula and the height over
    side d1 is 2S/d1. The product is evaluated in Kahan's sorted form,
    which is algebraically identical but stable for needle triangles.
    """
    a, b, p = (np.asarray(x, dtype=float) for x in (a, b, p))
    d1 = float(np.linalg.norm(a - b))
    if d1 == 0.0:
        raise DegenerateGeometryError("line endpoints coincide")
    d2 = float(np.linalg.norm(a - p))
    d3 = float(np.linalg.norm(b - p))
    x, y, z = sorted((d1, d2, d3), reverse=True)
    prod = (x + (y + z)) * (z - (x - y)) * (z + (x - y)) * (x + (y - z))
    area = 0.25 * math.sqrt(max(prod, 0.0))
    return 2.0 * area / d1


def closest_points_on_triangles(p, corners: np.ndarray) -> np.ndarray:
    """Closest point on each triangle of ``corners`` (m, 3, 3) to point ``p``.

    Vectorized region test (Ericson, Real-Time Collision Detection 5.1.5).
    """
    p = np.asarray(p, dtype=float)
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    out = np.empty_like(a)
    done = np.zeros(len(a), dtype=bool)

    def assign(mask, value):
        m = mask & ~done
        out[m] = value[m] if value.ndim == 2 else value
        done[m] = True

    with np.errstate(divide="ignore", invalid="ignore"):
        assign((d1 <= 0) & (d2 <= 0), a)
        assign((d3 >= 0) & (d4 <= d3), b)
        v = d1 / (d1 - d3)
        assign((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + v[:, None] * ab)
        assign((d6 >= 0) & (d5 <= d6), c)
        w = d2 / (d2 - d6)
        assign((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + w[:, None] * ac)
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        assign((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0),
               b + w[:, None] * (c - b))
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom
        assign(np.ones(len(a), dtype=bool), a + v[:, None] * ab + w[:, None] * ac)
    return out


def project_to_mesh(mesh: TriangleMesh, p) -> tuple[np.ndarray, int, float]:
    """Nearest surface point, the triangle it lies on, and the distance."""
    q = closest_points_on_triangles(p, mesh.corners)
    d = np.linalg.norm(q - np.asarray(p, dtype=float), axis=1)
    i = int(np.argmin(d))
    return q[i], i, float(d[i])


# ---------------------------------------------------------------------------
# Voxelization


@dataclass(frozen=True)
class Voxel:
    id: int
    center: tuple
    normal: tuple
    mp_id: str
    edge: float

    @property
    def c(self) -> np.ndarray:
        return np.array(self.center)

    @property
    def n(self) -> np.ndarray:
        return np.array(self.normal)


def clip_polygon_to_box(poly: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a planar 3D polygon against an AABB."""
    for axis in range(3):
        for bound, keep_below in ((lo[axis], False), (hi[axis], True)):
            if len(poly) == 0:
                return poly
            out = []
            n = len(poly)
            for i in range(n):
                cur, nxt = poly[i], poly[(i + 1) % n]
                dc = cur[axis] - bound
                dn = nxt[axis] - bound
                if keep_below:
                    dc, dn = -dc, -dn
                if dc >= 0:
                    out.append(cur)
                if (dc >= 0) != (dn >= 0):
                    t = dc / (dc - dn)
                    out.append(cur + t * (nxt - cur))
            poly = np.asarray(out) if out else np.empty((0, 3))
    return poly


def polygon_area_centroid(poly: np.ndarray) -> tuple[float, np.ndarray]:
    if len(poly) < 3:
        return 0.0, np.zeros(3)
    a = poly[0]
    b, c = poly[1:-1], poly[2:]
    cr = np.cross(b - a, c - a)
    areas = 0.5 * np.linalg.norm(cr, axis=1)
    total = float(areas.sum())
    if total == 0.0:
        return 0.0, np.zeros(3)
    cents = (a + b + c) / 3.0
    return total, (areas[:, None] * cents).sum(axis=0) / total


def _surface_patch(mesh: TriangleMesh, lo, hi):
    """Area, area-weighted centroid and normal of the mesh clipped to a box."""
    corners = mesh.corners
    tmin, tmax = corners.min(axis=1), corners.max(axis=1)
    cand = np.flatnonzero(((tmax >= lo) & (tmin <= hi)).all(axis=1))
    total = 0.0
    csum = np.zeros(3)
    nsum = np.zeros(3)
    for i in cand:
        area, cen = polygon_area_centroid(clip_polygon_to_box(corners[i], lo, hi))
        if area > 0.0:
            total += area
            csum += area * cen
            nsum += area * mesh.normals[i]
    if total == 0.0 or np.linalg.norm(nsum) == 0.0:
        return 0.0, None, None
    return total, csum / total, nsum / np.linalg.norm(nsum)


def voxelize(mesh: TriangleMesh, mps: Sequence[MeasurementPoint], edge: float,
             far_fov_width: float) -> list[Voxel]:
    """Partition the surface into cells holding one MP each.

    The grid is anchored at the mesh bounding-box minimum. Cells holding
    several MPs, or whose surface patch deviates from the surface by more
    than 5% of the cell edge, are halved octree-style until they comply;
    shrinking below :data:`MIN_VOXEL_EDGE` is an error. Only cells that
    hold an MP become voxels.
    """
    if not edge > 0:
        raise VoxelizationError("voxel edge must be positive")
    if not edge < 0.5 * far_fov_width:
        raise EdgeTooLargeError(
            f"voxel edge {edge} mm is not below half the far-FOV width "
            f"({0.5 * far_fov_width} mm)"
        )
    ids = [mp.id for mp in mps]
    if len(set(ids)) != len(ids):
        raise VoxelizationError("MP ids are not unique")
    if not mps:
        return []

    positions = np.array([mp.position for mp in mps])
    for mp, p in zip(mps, positions):
        _, _, dist = project_to_mesh(mesh, p)
        if dist > CHORDAL_FRACTION * edge:
            raise VoxelizationError(
                f"MP {mp.id} is {dist:.4g} mm off the surface "
                f"(limit {CHORDAL_FRACTION * edge:.4g} mm)"
            )

    origin = mesh.bounds[0]
    buckets: dict[tuple, list[int]] = {}
    for i, p in enumerate(positions):
        key = tuple(np.floor((p - origin) / edge).astype(np.int64))
        buckets.setdefault(key, []).append(i)

    leaves: list[tuple[int, np.ndarray, float]] = []

    def settle(lo: np.ndarray, size: float, members: list[int]):
        if len(members) == 1:
            i = members[0]
            hi = lo + size
            area, cen, nrm = _surface_patch(mesh, lo, hi)
            if area > 0.0:
                proj, _, dev = project_to_mesh(mesh, cen)
                if dev < CHORDAL_FRACTION * size:
                    leaves.append((i, lo, size, proj, nrm))
                    return
            else:
                # MP sits within tolerance of the surface but the cell
                # catches no patch; fall back to the MP's own foot point.
                proj, tri, _ = project_to_mesh(mesh, positions[i])
                leaves.append((i, lo, size, proj, mesh.normals[tri]))
                return
        half = size / 2.0
        if half < MIN_VOXEL_EDGE:
            names = ", ".join(mps[i].id for i in members)
            raise VoxelizationError(
                f"cannot separate MPs [{names}] above the {MIN_VOXEL_EDGE} mm floor"
            )
        children: dict[tuple, list[int]] = {}
        for i in members:
            key = tuple(
                np.clip(np.floor((positions[i] - lo) / half), 0, 1).astype(np.int64)
            )
            children.setdefault(key, []).append(i)
        for key in sorted(children):
            settle(lo + half * np.array(key, dtype=float), half, children[key])

    for key in sorted(buckets):
        settle(origin + edge * np.array(key, dtype=float), edge, buckets[key])

    leaves.sort(key=lambda leaf: leaf[0])
    return [
        Voxel(id=k, center=tuple(proj), normal=tuple(unit(nrm)),
              mp_id=mps[i].id, edge=size)
        for k, (i, _lo, size, proj, nrm) in enumerate(leaves)
    ]


def heron_distances(a, b, points: np.ndarray) -> np.ndarray:
    """Vectorized :func:`min_distance_point_to_line` over an (n, 3) array."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d1 = float(np.linalg.norm(a - b))
    if d1 == 0.0:
        raise DegenerateGeometryError("line endpoints coincide")
    pts = np.atleast_2d(points)
    d2 = np.linalg.norm(pts - a, axis=1)
    d3 = np.linalg.norm(pts - b, axis=1)
    s = np.sort(np.stack([np.full_like(d2, d1), d2, d3], axis=1), axis=1)
    z, y, x = s[:, 0], s[:, 1], s[:, 2]
    prod = (x + (y + z)) * (z - (x - y)) * (z + (x - y)) * (x + (y - z))
    return 0.5 * np.sqrt(np.maximum(prod, 0.0)) / d1
