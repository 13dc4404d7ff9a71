"""Plan, metrics and heatmap export, plus the strategy comparison table.

Plan and metrics files are JSON lines: a schema header first, then one
record per line, keys sorted, so reruns diff cleanly.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .geometry import TriangleMesh

SCHEMA_VERSION = 1
KINDS = ("hole", "slot", "trimming", "surface")


def _line(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False)


def _clean(x):
    """NaN and inf are not JSON; report them as null."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def bin_labels(edges: Sequence[float]) -> list[str]:
    edges = list(edges)
    inner = [f"[{a:g},{b:g})" for a, b in zip(edges, edges[1:])]
    return [f"<{edges[0]:g}", *inner, f">={edges[-1]:g}"]


def histogram(values: Sequence[float], edges: Sequence[float]) -> list[int]:
    """Counts per half-open bin [a, b), with underflow first and overflow last."""
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be at least two increasing values")
    vals = np.asarray([v for v in values if v is not None], dtype=float)
    # side="right" puts a value equal to an edge into the bin that starts there
    idx = np.searchsorted(edges, vals, side="right")
    return np.bincount(idx, minlength=len(edges) + 1).tolist()


# ---------------------------------------------------------------------------
# Documents


def plan_lines(result) -> list[str]:
    p = result.problem
    credited: dict[int, list[str]] = {}
    for o in result.outcomes:
        if o.viewpoint_id is not None:
            credited.setdefault(o.viewpoint_id, []).append(o.mp_id)
    lines = [_line({"schema": "scanplan.plan", "version": SCHEMA_VERSION,
                    "strategy": result.strategy, "seed": p.seed, "viewpoints": result.m,
                    "total_time": _clean(result.total_time)})]
    tm = result.times
    order = result.tour.order
    for k, vp in enumerate(result.ordered):
        i = order[k]
        leg = tm.home[i] if k == 0 else tm.times[order[k - 1], i]
        lines.append(_line({
            "type": "viewpoint", "order": k, "id": vp.id, "voxel": vp.voxel_id,
            "position": [float(x) for x in vp.position],
            "axis": [float(x) for x in vp.axis],
            "roll_deg": math.degrees(vp.roll),
            "travel_in": _clean(leg),
            "credited": credited.get(vp.id, []),
        }))
    if result.ordered:
        lines.append(_line({"type": "return", "travel_in": _clean(tm.home[order[-1]])}))
    for o in result.outcomes:
        lines.append(_line({
            "type": "mp", "id": o.mp_id, "kind": o.kind, "critical": o.critical,
            "viewpoint": o.viewpoint_id,
            "angle_deg": None if o.angle is None else math.degrees(o.angle),
            "u_sen": _clean(o.u_sen), "expanded": _clean(o.expanded),
            "limit": o.limit, "complies": o.complies,
        }))
    return lines


def metrics(result) -> dict:
    """Summary numbers for one plan."""
    kinds = {}
    for kind in KINDS:
        rows = [o for o in result.outcomes if o.kind == kind]
        if rows:
            kinds[kind] = {"n": len(rows), "mean_u": _clean(result.mean_uncertainty(kind)),
                           "r": result.compliance(kind)}
    edges = result.problem.bins
    u = [o.u_sen for o in result.outcomes]
    out = {
        "strategy": result.strategy,
        "m": result.m,
        "total_time": _clean(result.total_time),
        "r": result.compliance(),
        "mean_u": _clean(result.mean_uncertainty()),
        "kinds": kinds,
        "histogram": dict(zip(bin_labels(edges), histogram(u, edges))),
        "unmeasured": sum(o.u_sen is None for o in result.outcomes),
    }
    if "objective" in result.meta:
        out["objective"] = _clean(result.meta["objective"])
    return out


def metrics_lines(result) -> list[str]:
    m = metrics(result)
    lines = [_line({"schema": "scanplan.metrics", "version": SCHEMA_VERSION,
                    "strategy": m["strategy"], "seed": result.problem.seed})]
    summary = {k: m[k] for k in ("m", "total_time", "r", "mean_u", "unmeasured")}
    if "objective" in m:
        summary["objective"] = m["objective"]
    lines.append(_line({"type": "summary", **summary}))
    for kind, row in m["kinds"].items():
        lines.append(_line({"type": "kind", "kind": kind, **row}))
    edges = list(result.problem.bins)
    lo = [None, *edges]
    hi = [*edges, None]
    for label, count, a, b in zip(m["histogram"], m["histogram"].values(), lo, hi):
        lines.append(_line({"type": "bin", "label": label, "lo": a, "hi": b, "count": count}))
    return lines


def write_lines(path, lines: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# Heatmap

LOW = np.array([40, 70, 200])  # blue
HIGH = np.array([220, 40, 30])  # red
UNMEASURED = (128, 128, 128)


def ramp(u: float, lo: float, hi: float) -> tuple:
    """Linear blue-to-red colour for ``u`` clamped to [lo, hi]."""
    t = 0.0 if hi <= lo else min(max((u - lo) / (hi - lo), 0.0), 1.0)
    c = np.rint(LOW + t * (HIGH - LOW)).astype(int)
    return tuple(int(x) for x in c)


def vertex_colors(mesh: TriangleMesh, mp_positions: np.ndarray, achieved: Sequence,
                  edges: Sequence[float]) -> list[tuple]:
    """Each vertex takes the colour of its nearest MP's achieved uncertainty."""
    lo, hi = float(edges[0]), float(edges[-1])
    pts = np.asarray(mp_positions, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        return [UNMEASURED] * len(mesh.vertices)
    d = np.linalg.norm(mesh.vertices[:, None, :] - pts[None, :, :], axis=2)
    nearest = np.argmin(d, axis=1)
    palette = [UNMEASURED if u is None else ramp(u, lo, hi) for u in achieved]
    return [palette[i] for i in nearest]


def heatmap_ply(mesh: TriangleMesh, mps, achieved: Mapping[str, float | None],
                edges: Sequence[float]) -> str:
    """ASCII PLY with per-vertex colours and a legend in the comments."""
    positions = np.array([mp.position for mp in mps], dtype=float).reshape(-1, 3)
    colors = vertex_colors(mesh, positions, [achieved.get(mp.id) for mp in mps], edges)
    edges = list(edges)
    lines = ["ply", "format ascii 1.0", "comment scanplan uncertainty heatmap (mm)"]
    labels = bin_labels(edges)[1:-1]
    for label, a, b in zip(labels, edges, edges[1:]):
        r, g, bl = ramp((a + b) / 2.0, edges[0], edges[-1])
        lines.append(f"comment legend {label} {r} {g} {bl}")
    lines.append(f"comment legend unmeasured {UNMEASURED[0]} {UNMEASURED[1]} {UNMEASURED[2]}")
    lines += [
        f"element vertex {len(mesh.vertices)}",
        "property float x", "property float y", "property float z",
        "property uchar red", "property uchar green", "property uchar blue",
        f"element face {len(mesh.triangles)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for v, c in zip(mesh.vertices, colors):
        lines.append(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r} {c[0]} {c[1]} {c[2]}")
    for f in mesh.triangles:
        lines.append(f"3 {int(f[0])} {int(f[1])} {int(f[2])}")
    return "\n".join(lines) + "\n"


def write_heatmap(path, result) -> Path:
    p = result.problem
    text = heatmap_ply(p.mesh, p.mps, result.achieved(), p.bins)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


# ---------------------------------------------------------------------------
# Comparison


def comparison_rows(results: Sequence) -> list[dict]:
    rows = []
    for r in results:
        m = metrics(r)
        row = {"strategy": r.strategy, "m": m["m"], "time": m["total_time"], "r": m["r"]}
        for kind in KINDS:
            row[kind] = m["kinds"].get(kind, {}).get("mean_u")
        rows.append(row)
    return rows


def comparison_table(results: Sequence) -> str:
    """Fixed-width text table: viewpoints, time, per-kind mean U and r."""
    rows = comparison_rows(results)
    head = ["strategy", "m", "time_s", *[f"U_{k}" for k in KINDS], "r"]

    def fmt(x, spec):
        return "-" if x is None else format(x, spec)

    body = [[row["strategy"], str(row["m"]), fmt(row["time"], ".2f"),
             *[fmt(row[k], ".4f") for k in KINDS], fmt(100.0 * row["r"], ".1f") + "%"]
            for row in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(head)]
    out = ["  ".join(h.ljust(w) for h, w in zip(head, widths))]
    out += ["  ".join(c.ljust(w) for c, w in zip(b, widths)) for b in body]
    return "\n".join(s.rstrip() for s in out) + "\n"
