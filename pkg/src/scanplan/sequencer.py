"""Visiting order of the selected viewpoints.

Travel times between poses come from a straight move when the swept sensor
box is clear, else from a sampled detour. The order is then found by
simulated annealing on an open tour that starts and ends at home:

    total = t(home, v1) + sum t(vk, vk+1) + t(vm, home) + m * t0
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import UnreachablePairError
from .geometry import any_perpendicular, rotation_angle, sensor_frame
from .visibility import Scene, SensorBody, Viewpoint, collides_at


@dataclass(frozen=True)
class RobotParams:
    v_lin: float = 100.0  # mm/s
    v_ang: float = math.radians(60.0)  # rad/s
    detour_iters: int = 4000
    detour_step: float = 60.0  # mm
    goal_bias: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not self.v_lin > 0 or not self.v_ang > 0:
            raise ValueError("speeds must be positive")


def _slerp_axis(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    c = float(np.clip(a @ b, -1.0, 1.0))
    theta = math.acos(c)
    if theta < 1e-9:
        return a.copy()
    if math.pi - theta < 1e-9:
        # antipodal: rotate through any perpendicular
        perp = any_perpendicular(a)
        return math.cos(math.pi * t) * a + math.sin(math.pi * t) * perp
    s = math.sin(theta)
    return (math.sin((1 - t) * theta) * a + math.sin(t * theta) * b) / s


def _frame_at(a: Viewpoint, b: Viewpoint, t: float) -> np.ndarray:
    axis = _slerp_axis(np.asarray(a.axis), np.asarray(b.axis), t)
    return sensor_frame(axis, (1 - t) * a.roll + t * b.roll)


def segment_clear(scene: Scene, body: SensorBody, p0, p1, a: Viewpoint, b: Viewpoint,
                  t0: float = 0.0, t1: float = 1.0) -> bool:
    """Swept-box check by dense sampling; ``t0..t1`` drives the orientation blend."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    step = max(min(body.size) / 4.0, 1.0)
    n = max(2, int(math.ceil(np.linalg.norm(p1 - p0) / step)) + 1)
    for s in np.linspace(0.0, 1.0, n):
        t = t0 + s * (t1 - t0)
        if collides_at(scene, body, p0 + s * (p1 - p0), _frame_at(a, b, t)):
            return False
    return True


def polyline_time(points: Sequence, a: Viewpoint, b: Viewpoint, robot: RobotParams) -> float:
    """Synchronized move: the slower of translation and rotation sets the pace."""
    pts = np.asarray(points, dtype=float)
    length = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
    turn = rotation_angle(a.frame, b.frame)
    return max(length / robot.v_lin, turn / robot.v_ang)


def _detour(scene: Scene, body: SensorBody, a: Viewpoint, b: Viewpoint,
            robot: RobotParams) -> list:
    """Goal-biased RRT in position space, then greedy shortcutting."""
    rng = np.random.default_rng(robot.seed)
    start, goal = a.p, b.p
    pts = [start, goal] + ([scene.lo.min(axis=0), scene.hi.max(axis=0)] if len(scene) else [])
    lo = np.min(pts, axis=0)
    hi = np.max(pts, axis=0)
    pad = np.linalg.norm(hi - lo) * 0.25 + max(body.size) + body.clearance
    lo, hi = lo - pad, hi + pad
    total = float(np.linalg.norm(goal - start)) or 1.0

    def progress(p):
        # orientation blend follows distance already covered toward the goal
        d0 = np.linalg.norm(p - start)
        d1 = np.linalg.norm(goal - p)
        return float(d0 / (d0 + d1)) if d0 + d1 > 0 else 0.0

    nodes = [start]
    parent = [-1]
    for _ in range(robot.detour_iters):
        target = goal if rng.random() < robot.goal_bias else rng.uniform(lo, hi)
        arr = np.asarray(nodes)
        k = int(np.argmin(np.linalg.norm(arr - target, axis=1)))
        near = nodes[k]
        direction = target - near
        dist = float(np.linalg.norm(direction))
        if dist == 0:
            continue
        new = near + direction * min(1.0, robot.detour_step / dist)
        if not segment_clear(scene, body, near, new, a, b, progress(near), progress(new)):
            continue
        nodes.append(new)
        parent.append(k)
        if segment_clear(scene, body, new, goal, a, b, progress(new), 1.0):
            path = [goal]
            j = len(nodes) - 1
            while j != -1:
                path.append(nodes[j])
                j = parent[j]
            path.reverse()
            return _shortcut(scene, body, path, a, b, progress)
    raise UnreachablePairError(
        f"no collision-free path between viewpoints {a.id} and {b.id} "
        f"after {robot.detour_iters} samples (straight distance {total:.1f} mm)"
    )


def _shortcut(scene, body, path, a, b, progress):
    out = [path[0]]
    i = 0
    while i < len(path) - 1:
        j = len(path) - 1
        while j > i + 1 and not segment_clear(
                scene, body, path[i], path[j], a, b, progress(path[i]), progress(path[j])):
            j -= 1
        out.append(path[j])
        i = j
    return out


def local_path(a: Viewpoint, b: Viewpoint, scene: Scene, body: SensorBody,
               robot: RobotParams = RobotParams()) -> list:
    if segment_clear(scene, body, a.p, b.p, a, b):
        return [a.p, b.p]
    return _detour(scene, body, a, b, robot)


def local_path_time(a: Viewpoint, b: Viewpoint, scene: Scene, body: SensorBody,
                    robot: RobotParams = RobotParams()) -> float:
    """Travel time from ``a`` to ``b`` along a collision-free path."""
    return polyline_time(local_path(a, b, scene, body, robot), a, b, robot)


@dataclass
class TimeMatrix:
    times: np.ndarray  # (m, m), +inf on the diagonal
    home: np.ndarray  # (m,), home <-> viewpoint, same both ways
    scan_time: float
    ids: tuple = ()

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.home = np.asarray(self.home, dtype=float)
        m = len(self.home)
        if self.times.shape != (m, m):
            raise ValueError("time matrix and home legs disagree in size")
        if not np.allclose(self.times, self.times.T, equal_nan=False) and m:
            raise ValueError("time matrix must be symmetric")
        if m and not np.all(np.isinf(np.diag(self.times))):
            raise ValueError("diagonal must be +inf")
        if not self.ids:
            self.ids = tuple(range(m))

    @property
    def m(self) -> int:
        return len(self.home)

    def tour_total(self, order: Sequence[int]) -> float:
        order = list(order)
        if sorted(order) != list(range(self.m)):
            raise ValueError("order must visit every viewpoint exactly once")
        if not order:
            return 0.0
        legs = [self.times[i, j] for i, j in zip(order, order[1:])]
        return math.fsum([self.home[order[0]], *legs, self.home[order[-1]]]) + self.m * self.scan_time


def build_time_matrix(viewpoints: Sequence[Viewpoint], home: Viewpoint, scene: Scene,
                      body: SensorBody, robot: RobotParams = RobotParams(),
                      scan_time: float = 5.0) -> TimeMatrix:
    m = len(viewpoints)
    if m < 1:
        raise ValueError("need at least one viewpoint")
    times = np.full((m, m), math.inf)
    for i in range(m):
        for j in range(i + 1, m):
            times[i, j] = times[j, i] = local_path_time(viewpoints[i], viewpoints[j], scene, body, robot)
    legs = np.array([local_path_time(home, vp, scene, body, robot) for vp in viewpoints])
    return TimeMatrix(times, legs, scan_time, tuple(vp.id for vp in viewpoints))


@dataclass(frozen=True)
class SAParams:
    cooling: float = 0.995
    iters_per_node: int = 200
    restarts: int = 3
    temperature_samples: int = 100

    def __post_init__(self):
        if not 0 < self.cooling < 1:
            raise ValueError("cooling ratio must lie in (0, 1)")
        if self.iters_per_node < 1 or self.restarts < 1:
            raise ValueError("iterations and restarts must be positive")


@dataclass
class Tour:
    order: list  # positions into the time matrix
    total: float
    ids: tuple = ()
    history: list = field(default_factory=list, repr=False)  # best-so-far per iteration


def _open_cost(tm: TimeMatrix, order: np.ndarray) -> float:
    t = tm.times
    inner = t[order[:-1], order[1:]].sum() if len(order) > 1 else 0.0
    return float(tm.home[order[0]] + inner + tm.home[order[-1]])


def _propose(order: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    m = len(order)
    i, j = sorted(int(x) for x in rng.choice(m, size=2, replace=False))
    if rng.random() < 0.5:
        # 2-opt: reverse the slice i..j
        new = order.copy()
        new[i:j + 1] = order[i:j + 1][::-1]
        return new
    # segment relocation (or-opt) with optional reversal
    seg_len = int(rng.integers(1, min(3, m - 1) + 1))
    start = int(rng.integers(0, m - seg_len + 1))
    seg = order[start:start + seg_len]
    if rng.random() < 0.5:
        seg = seg[::-1]
    rest = np.concatenate([order[:start], order[start + seg_len:]])
    pos = int(rng.integers(0, len(rest) + 1))
    return np.concatenate([rest[:pos], seg, rest[pos:]])


def solve_tsp_sa(tm: TimeMatrix, params: SAParams = SAParams(), seed: int = 0,
                 on_iterate: Callable[[np.ndarray], None] | None = None) -> Tour:
    """Simulated annealing over visiting orders.

    The start temperature is the standard deviation of random-tour costs;
    cooling is geometric. Restarts run sequentially from fresh random
    orders and the best tour overall is returned.
    """
    m = tm.m
    if m < 1:
        raise ValueError("need at least one viewpoint")
    rng = np.random.default_rng(seed)
    if m < 3:
        # every order has the same cost or its mirror image does
        order = list(range(m))
        if m == 2 and _open_cost(tm, np.array([1, 0])) < _open_cost(tm, np.array([0, 1])):
            order = [1, 0]
        total = tm.tour_total(order)
        return Tour(order, total, tuple(tm.ids[i] for i in order), [total])

    samples = [_open_cost(tm, rng.permutation(m)) for _ in range(params.temperature_samples)]
    t_start = float(np.std(samples)) or 1.0
    n_iter = params.iters_per_node * m
    best_order, best_cost = None, math.inf
    history = []
    for _ in range(params.restarts):
        cur = rng.permutation(m)
        cur_cost = _open_cost(tm, cur)
        if cur_cost < best_cost:
            best_order, best_cost = cur.copy(), cur_cost
        temp = t_start
        for _ in range(n_iter):
            cand = _propose(cur, rng)
            if on_iterate is not None:
                on_iterate(cand)
            c = _open_cost(tm, cand)
            delta = c - cur_cost
            if delta <= 0 or rng.random() < math.exp(-delta / temp):
                cur, cur_cost = cand, c
                if cur_cost < best_cost:
                    best_order, best_cost = cur.copy(), cur_cost
            history.append(best_cost)
            temp *= params.cooling
    order = [int(i) for i in best_order]
    return Tour(order, tm.tour_total(order), tuple(tm.ids[i] for i in order), history)
