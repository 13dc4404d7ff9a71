"""End-to-end planning: load, budget, voxelize, candidates, select, sequence."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .baseline import greedy_target_sampling
from .candidates import CandidateGrid, CandidateSet, check_coverage, generate_candidates
from .config import Config
from .errors import ConfigError
from .geometry import TriangleMesh, load_mesh, load_mps, unit, voxelize
from .sampler import PlanGraph, SamplerConfig, plan_viewpoints
from .sequencer import RobotParams, SAParams, TimeMatrix, Tour, build_time_matrix, solve_tsp_sa
from .uncertainty import SensorUncertaintyCurve, UncertaintyBudget, sensor_uncertainty_at
from .visibility import (
    MPTable,
    Scene,
    SensorBody,
    SensorModel,
    ShellConeOracle,
    Viewpoint,
    VisibilityModel,
    determination_set,
)


@dataclass
class Problem:
    mesh: TriangleMesh
    scene: Scene
    mps: list
    budgets: dict
    model: VisibilityModel
    grid: CandidateGrid
    voxel_edge: float
    home: Viewpoint
    sampler: SamplerConfig
    robot: RobotParams
    sa: SAParams
    bins: tuple
    seed: int = 0
    baseline_gates: bool = False

    @property
    def alpha_max(self) -> dict:
        return {i: b.alpha_max for i, b in self.budgets.items()}

    @property
    def alpha_free(self) -> dict:
        return {mp.id: self.model.curve.alpha_limit for mp in self.mps}


@dataclass
class MPOutcome:
    mp_id: str
    kind: str
    critical: bool
    viewpoint_id: int | None
    angle: float | None
    u_sen: float | None
    expanded: float | None
    limit: float  # T / 8
    complies: bool


@dataclass
class PlanResult:
    strategy: str
    problem: Problem
    voxels: list
    candidates: CandidateSet
    ordered: list  # viewpoints in visiting order
    tour: Tour
    times: TimeMatrix
    outcomes: list
    graph: PlanGraph | None = None
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.ordered)

    @property
    def total_time(self) -> float:
        return self.tour.total

    def compliance(self, kind: str | None = None) -> float:
        rows = [o for o in self.outcomes if kind is None or o.kind == kind]
        return sum(o.complies for o in rows) / len(rows) if rows else float("nan")

    def mean_uncertainty(self, kind: str | None = None) -> float:
        vals = [o.u_sen for o in self.outcomes
                if (kind is None or o.kind == kind) and o.u_sen is not None]
        return math.fsum(vals) / len(vals) if vals else float("nan")

    def achieved(self) -> dict:
        return {o.mp_id: o.u_sen for o in self.outcomes}


def _vec(value, n=3, name="value"):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (n,):
        raise ConfigError(f"{name} must have {n} components")
    return arr


def build_problem(cfg: Config) -> Problem:
    """Construct every planning object named by the config."""
    cfg.validate()
    d = cfg.data
    try:
        s = d["sensor"]
        sensor = SensorModel(tuple(s["near_fov"]), tuple(s["far_fov"]), float(s["dof"]),
                             float(s["scan_depth"]), float(s["scan_time"]))
        body = SensorBody(tuple(s["body"]["size"]), float(s["body"]["offset"]),
                          float(s["body"]["clearance"]))
        u = d["uncertainty"]
        curve = SensorUncertaintyCurve.from_degrees(u["curve_deg"])
        k, u_mat, u_rot = float(u["k"]), float(u["u_mat"]), float(u["u_rot"])
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid sensor/uncertainty settings: {exc}") from exc

    mesh = load_mesh(cfg.path(d["part"]["mesh"]))
    obstacles = [load_mesh(cfg.path(p)) for p in d["part"]["obstacles"] or []]
    defaults = {kind: cfg.tolerance_interval(kind) for kind in d["tolerance_pm"]}
    mps = load_mps(cfg.path(d["part"]["mps"]), defaults)
    if not mps:
        raise ConfigError("MP file lists no measurement points; nothing to plan")

    budgets = {mp.id: UncertaintyBudget.derive(mp.tolerance, curve, k, u_mat, u_rot) for mp in mps}

    lo, hi = mesh.bounds
    centre = (lo + hi) / 2.0
    a = d["accessibility"]
    base = a["base"]
    base = np.array([centre[0], centre[1], lo[2]]) if base is None else _vec(base, name="accessibility.base")
    try:
        oracle = ShellConeOracle(tuple(base), float(a["r_min"]), float(a["r_max"]),
                                 tuple(a["cone_axis"]), math.radians(float(a["cone_half_angle_deg"])))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid accessibility settings: {exc}") from exc
    smp = d["sampler"]
    if smp["angle_mode"] not in ("beam", "axis"):
        raise ConfigError("sampler.angle_mode must be 'beam' or 'axis'")
    model = VisibilityModel(sensor, curve, Scene.from_meshes(mesh, *obstacles), body, oracle,
                            smp["angle_mode"])

    c = d["candidates"]
    try:
        n_depths = int(c["depths"])
        depths = None if n_depths == 1 else CandidateGrid.spread(model, n_depths)
        grid = CandidateGrid(int(c["rings"]), int(c["azimuths"]), depths,
                             tuple(math.radians(float(r)) for r in c["rolls_deg"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid candidate grid: {exc}") from exc

    h = d["home"]
    home_pos = h["position"]
    if home_pos is None:
        home_pos = [centre[0], centre[1], hi[2] + sensor.scan_depth + 250.0]
    home = Viewpoint(-1, tuple(_vec(home_pos, name="home.position")),
                     tuple(unit(_vec(h["axis"], name="home.axis"))), 0.0)

    seed = int(d["seed"])
    spacing = smp["spacing"]
    try:
        sampler = SamplerConfig(
            float(smp["beta1"]), float(smp["gamma1"]), float(smp["beta2"]), float(smp["gamma2"]),
            sensor.far_width if spacing is None else float(spacing),
            None if smp["radius"] is None else float(smp["radius"]),
            int(smp["max_iter"]), seed, bool(smp["refresh_before_extend"]),
        )
        r = d["robot"]
        robot = RobotParams(float(r["v_lin"]), math.radians(float(r["v_ang_deg"])),
                            int(r["detour_iters"]), float(r["detour_step"]), seed=seed)
        sa = SAParams(float(d["sa"]["cooling"]), int(d["sa"]["iters_per_node"]),
                      int(d["sa"]["restarts"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid search settings: {exc}") from exc

    return Problem(mesh, model.scene, mps, budgets, model, grid, float(d["voxel"]["edge"]),
                   home, sampler, robot, sa, tuple(float(b) for b in d["report"]["bins"]),
                   seed, bool(d["baseline"]["gates"]))


def evaluate(ordered, problem: Problem) -> list[MPOutcome]:
    """Independent re-check of a finished plan.

    Visibility is recomputed from scratch without the uncertainty gate;
    each MP is credited to the covering viewpoint with the smallest
    incident angle (earliest in visiting order on ties).
    """
    table = MPTable.from_mps(problem.mps)
    free = problem.alpha_free
    best: dict[str, tuple[float, int]] = {}
    for vp in ordered:
        vs = determination_set(vp, table, free, problem.model)
        for mid, ang in zip(vs.mp_ids, vs.angles):
            if mid not in best or ang < best[mid][0]:
                best[mid] = (ang, vp.id)
    out = []
    curve = problem.model.curve
    for mp in problem.mps:
        b = problem.budgets[mp.id]
        limit = mp.tolerance / 8.0
        if mp.id not in best:
            out.append(MPOutcome(mp.id, mp.kind, mp.critical, None, None, None, None, limit, False))
            continue
        ang, vid = best[mp.id]
        u = sensor_uncertainty_at(curve, min(ang, curve.alpha_limit))
        expanded = b.k * math.sqrt(u * u + b.u_mat ** 2 + b.u_rot ** 2)
        out.append(MPOutcome(mp.id, mp.kind, mp.critical, vid, ang, u, expanded, limit,
                             expanded <= limit + 1e-9))
    return out


def select(problem: Problem, strategy: str, voxels=None):
    """Candidate generation and viewpoint selection for one strategy."""
    if voxels is None:
        voxels = voxelize(problem.mesh, problem.mps, problem.voxel_edge,
                          problem.model.sensor.far_width)
    ids = [mp.id for mp in problem.mps]
    if strategy == "rrt":
        alpha = problem.alpha_max
        cands = generate_candidates(voxels, problem.mps, alpha, problem.model, problem.grid)
        check_coverage(cands.visible, ids)
        graph = plan_viewpoints(cands.viewpoints, cands.visible, ids, problem.home, problem.sampler)
        return voxels, cands, graph.selected_viewpoints(), graph
    if strategy == "baseline":
        alpha = problem.alpha_max if problem.baseline_gates else problem.alpha_free
        cands = generate_candidates(voxels, problem.mps, alpha, problem.model, problem.grid)
        check_coverage(cands.visible, ids)
        chosen = greedy_target_sampling(cands.viewpoints, cands.visible, ids, problem.home.position)
        return voxels, cands, chosen, None
    raise ConfigError(f"unknown strategy {strategy!r}")


def run(problem: Problem, strategy: str, voxels=None) -> PlanResult:
    voxels, cands, chosen, graph = select(problem, strategy, voxels)
    times = build_time_matrix(chosen, problem.home, problem.scene, problem.model.body,
                              problem.robot, problem.model.sensor.scan_time)
    tour = solve_tsp_sa(times, problem.sa, seed=problem.seed)
    ordered = [chosen[i] for i in tour.order]
    result = PlanResult(strategy, problem, voxels, cands, ordered, tour, times,
                        evaluate(ordered, problem), graph)
    if graph is not None:
        result.meta["objective"] = graph.objective(problem.sampler.beta1, problem.sampler.gamma1)
    return result


def plan_from_config(cfg: Config, strategy: str | None = None) -> PlanResult:
    problem = build_problem(cfg)
    return run(problem, strategy or cfg["strategy"])

