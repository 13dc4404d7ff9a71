"""Viewpoint subset selection by an RRT*-style tree search.

The tree grows over the candidate set. Each accepted node records the MPs
it measures for the first time along its root path. A new node is chosen
near the line between a random candidate and the current best neighbour,
its parent is picked by an uncertainty-plus-coverage cost (no rewiring),
and the search stops once some root path covers every MP.

The score of a root path is

    beta1 * sum over nodes of mean(U of first-time MPs) + gamma1 * m

and the parent cost for a pair (near, new) is

    beta2 * (sum U new-first + sum U near-first) / (n_new + n_near)
    + gamma2 * (n_new + n_near).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import CoverageFailure, DegenerateCostError, InvalidGraphError
from .geometry import heron_distances
from .visibility import Viewpoint, VisibleSet

ROOT = 0


@dataclass(frozen=True)
class SamplerConfig:
    beta1: float = 1.0
    gamma1: float = 0.05
    beta2: float = 1.0
    gamma2: float = -0.02
    spacing: float = 160.0  # L: minimum stand-off from q_nearest when extending
    radius: float | None = None  # epsilon; None means 2 * spacing
    max_iter: int = 2000
    seed: int = 0
    refresh_before_extend: bool = False

    def __post_init__(self):
        if not self.beta1 > 0 or not self.beta2 > 0:
            raise ValueError("beta1 and beta2 must be positive")
        if not self.spacing > 0:
            raise ValueError("spacing L must be positive")
        if self.radius is not None and not self.radius > 0:
            raise ValueError("neighbour radius must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")

    @property
    def eps(self) -> float:
        return 2.0 * self.spacing if self.radius is None else self.radius


def objective(new_uncertainties: Sequence[Sequence[float]], beta1: float, gamma1: float) -> float:
    """Path score from the first-time uncertainties of each node."""
    total = 0.0
    for i, us in enumerate(new_uncertainties):
        if len(us) == 0:
            raise InvalidGraphError(f"node {i} on the path measures nothing new")
        total += math.fsum(us) / len(us)
    return beta1 * total + gamma1 * len(new_uncertainties)


def cost(near_new_u: Sequence[float], new_new_u: Sequence[float],
         beta2: float, gamma2: float) -> float:
    """Parent cost for attaching a node under a given neighbour.

    ``near_new_u`` are the uncertainties of the MPs the neighbour itself
    measured first; ``new_new_u`` those the new node would measure first
    beneath it.
    """
    n = len(near_new_u) + len(new_new_u)
    if n == 0:
        raise DegenerateCostError("neither node contributes a first-time MP")
    return beta2 * (math.fsum(near_new_u) + math.fsum(new_new_u)) / n + gamma2 * n


def entropy_weights(visible: Mapping[int, VisibleSet]) -> tuple[float, float]:
    """Entropy-method weights for (mean uncertainty, coverage count).

    Each candidate is scored on both criteria; the criterion whose values
    are more dispersed across candidates gets the larger weight. Returned
    as magnitudes summing to 1; callers apply the sign for coverage.
    """
    rows = [(float(np.mean(vs.u_sen)), float(vs.n)) for vs in visible.values() if vs.n]
    if len(rows) < 2:
        return 0.5, 0.5
    x = np.array(rows)
    p = x / x.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p), 0.0)
    e = -plogp.sum(axis=0) / math.log(len(x))
    d = 1.0 - e
    if d.sum() <= 0:
        return 0.5, 0.5
    w = d / d.sum()
    return float(w[0]), float(w[1])


# ---------------------------------------------------------------------------
# Tree


@dataclass
class Node:
    index: int
    candidate: int | None  # position in the candidate list; None for the root
    parent: int | None
    new_ids: tuple
    new_u: tuple
    covered: np.ndarray = field(repr=False)


class PlanGraph:
    """Directed tree over accepted viewpoints, rooted at the home pose."""

    def __init__(self, home: Viewpoint, candidates: Sequence[Viewpoint],
                 visible: Mapping[int, VisibleSet], mp_ids: Sequence[str]):
        self.home = home
        self.candidates = list(candidates)
        self.mp_ids = tuple(mp_ids)
        self._bit = {m: i for i, m in enumerate(self.mp_ids)}
        n_mp, n_c = len(self.mp_ids), len(self.candidates)
        self.positions = np.array([vp.position for vp in self.candidates], dtype=float).reshape(-1, 3)
        self.vis = np.zeros((n_c, n_mp), dtype=bool)
        self.u = np.zeros((n_c, n_mp))
        for c, vp in enumerate(self.candidates):
            vs = visible[vp.id]
            for mid, u in zip(vs.mp_ids, vs.u_sen):
                j = self._bit.get(mid)
                if j is not None:
                    self.vis[c, j] = True
                    self.u[c, j] = u
        self.selected = np.zeros(n_c, dtype=bool)
        self.nodes = [Node(ROOT, None, None, (), (), np.zeros(n_mp, dtype=bool))]
        self.best: int | None = None
        # per-node arrays mirroring self.nodes, for vectorized cost queries
        self._pos = [np.asarray(home.position, dtype=float)]
        self._cov = [self.nodes[0].covered]
        self._own_n = [0]
        self._own_u = [0.0]

    def node_positions(self) -> np.ndarray:
        return np.array(self._pos)

    def node_covered(self) -> np.ndarray:
        return np.array(self._cov)

    def pair_costs(self, nodes: np.ndarray, cand: int, beta2: float, gamma2: float):
        """Parent cost of ``cand`` under each of ``nodes``, plus its first-time counts.

        Entries with zero combined first-time coverage are +inf.
        """
        nodes = np.asarray(nodes, dtype=int)
        cov = np.array([self._cov[i] for i in nodes]).reshape(len(nodes), -1)
        new = self.vis[cand][None, :] & ~cov
        n_new = new.sum(axis=1)
        u_new = np.where(new, self.u[cand][None, :], 0.0).sum(axis=1)
        own_n = np.array([self._own_n[i] for i in nodes], dtype=float)
        own_u = np.array([self._own_u[i] for i in nodes], dtype=float)
        n = own_n + n_new
        with np.errstate(divide="ignore", invalid="ignore"):
            c = beta2 * (own_u + u_new) / n + gamma2 * n
        return np.where(n > 0, c, np.inf), n_new

    # -- queries -----------------------------------------------------------

    def position(self, node: int) -> np.ndarray:
        c = self.nodes[node].candidate
        return np.asarray(self.home.position) if c is None else self.positions[c]

    def viewpoint(self, node: int) -> Viewpoint:
        c = self.nodes[node].candidate
        return self.home if c is None else self.candidates[c]

    def first_time(self, parent: int, cand: int) -> np.ndarray:
        return self.vis[cand] & ~self.nodes[parent].covered

    def path(self, node: int | None = None) -> list[int]:
        """Node indices from the first node after the root down to ``node``."""
        node = self.best if node is None else node
        if node is None:
            return []
        out = []
        while node != ROOT:
            out.append(node)
            node = self.nodes[node].parent
        return out[::-1]

    def selected_viewpoints(self, node: int | None = None) -> list[Viewpoint]:
        return [self.viewpoint(i) for i in self.path(node)]

    def objective(self, beta1: float, gamma1: float, node: int | None = None) -> float:
        return objective([self.nodes[i].new_u for i in self.path(node)], beta1, gamma1)

    def most_covering(self) -> int:
        counts = [int(n.covered.sum()) for n in self.nodes]
        return int(np.argmax(counts))

    def uncovered(self, node: int | None = None) -> list[str]:
        node = self.most_covering() if node is None else node
        cov = self.nodes[node].covered
        return [m for m, c in zip(self.mp_ids, cov) if not c]

    # -- mutation ----------------------------------------------------------

    def add(self, cand: int, parent: int) -> int:
        new = self.first_time(parent, cand)
        if not new.any():
            raise InvalidGraphError("node would measure no new MP")
        idx = np.flatnonzero(new)
        node = Node(
            len(self.nodes), cand, parent,
            tuple(self.mp_ids[j] for j in idx),
            tuple(float(self.u[cand, j]) for j in idx),
            self.nodes[parent].covered | new,
        )
        self.nodes.append(node)
        self._pos.append(self.positions[cand])
        self._cov.append(node.covered)
        self._own_n.append(len(idx))
        self._own_u.append(math.fsum(node.new_u))
        self.selected[cand] = True
        return node.index

    # -- export ------------------------------------------------------------

    def to_lines(self, beta1: float | None = None, gamma1: float | None = None) -> list[str]:
        head = {"schema": "scanplan.graph", "version": 1, "nodes": len(self.nodes),
                "best": self.best, "mps": len(self.mp_ids)}
        if beta1 is not None and self.best is not None:
            head["objective"] = self.objective(beta1, gamma1)
        lines = [json.dumps(head, sort_keys=True)]
        for n in self.nodes:
            vp = self.viewpoint(n.index)
            lines.append(json.dumps({
                "node": n.index,
                "viewpoint": None if n.candidate is None else vp.id,
                "parent": n.parent,
                "new": list(n.new_ids),
                "new_u": list(n.new_u),
                "covered": int(n.covered.sum()),
            }, sort_keys=True))
        return lines


# ---------------------------------------------------------------------------
# Search steps


def extend(graph: PlanGraph, q_rand: int, q_nearest: int, spacing: float) -> int | None:
    """Unselected candidate beyond ``spacing`` of ``q_nearest`` lying closest
    to the line through ``q_rand`` and ``q_nearest``; None if there is none.
    """
    anchor = graph.position(q_nearest)
    free = np.flatnonzero(~graph.selected)
    if len(free) == 0:
        return None
    pts = graph.positions[free]
    far = np.linalg.norm(pts - anchor, axis=1) > spacing
    free, pts = free[far], pts[far]
    if len(free) == 0:
        return None
    target = graph.positions[q_rand]
    if np.array_equal(target, anchor):
        # degenerate line: fall back to distance from the point itself
        d = np.linalg.norm(pts - anchor, axis=1)
    else:
        d = heron_distances(target, anchor, pts)
    return int(free[int(np.argmin(d))])


def _pair_cost(graph: PlanGraph, near: int, cand: int, cfg: SamplerConfig) -> float:
    new = graph.first_time(near, cand)
    return cost(graph.nodes[near].new_u, graph.u[cand, new].tolist(), cfg.beta2, cfg.gamma2)


def _within(graph: PlanGraph, cand: int, eps: float) -> np.ndarray:
    d = np.linalg.norm(graph.node_positions() - graph.positions[cand], axis=1)
    return np.flatnonzero(d < eps)


def neighbors(graph: PlanGraph, cand: int, eps: float) -> list[int]:
    return [int(i) for i in _within(graph, cand, eps)]


def find_best_neighbor(graph: PlanGraph, cand: int, cfg: SamplerConfig) -> int:
    """Lowest-cost tree node within eps of ``cand``; Euclidean nearest if none."""
    near = _within(graph, cand, cfg.eps)
    if len(near):
        costs, _ = graph.pair_costs(near, cand, cfg.beta2, cfg.gamma2)
        k = int(np.argmin(costs))
        if np.isfinite(costs[k]):
            return int(near[k])
    d = np.linalg.norm(graph.node_positions() - graph.positions[cand], axis=1)
    return int(np.argmin(d))


def choose_parent(graph: PlanGraph, near: Sequence[int], cand: int, q_nearest: int,
                  cfg: SamplerConfig) -> int | None:
    """Cheapest admissible parent among q_nearest and ``near``.

    A parent is admissible only if ``cand`` would still measure at least one
    MP for the first time beneath it. Ties keep q_nearest, then the lowest
    node index. Returns None when no parent is admissible.
    """
    order = np.array([q_nearest] + sorted(int(i) for i in near if i != q_nearest), dtype=int)
    costs, n_new = graph.pair_costs(order, cand, cfg.beta2, cfg.gamma2)
    costs = np.where(n_new > 0, costs, np.inf)
    k = int(np.argmin(costs))
    return int(order[k]) if np.isfinite(costs[k]) else None


def plan_viewpoints(candidates: Sequence[Viewpoint], visible: Mapping[int, VisibleSet],
                    mp_ids: Sequence[str], home: Viewpoint,
                    cfg: SamplerConfig = SamplerConfig()) -> PlanGraph:
    """Grow the tree until a root path covers every MP.

    Raises :class:`CoverageFailure` carrying the partial graph when the
    iteration budget runs out first.
    """
    graph = PlanGraph(home, candidates, visible, mp_ids)
    if len(graph.candidates) == 0:
        raise CoverageFailure("no candidates", uncovered=mp_ids, graph=graph)
    missing = ~graph.vis.any(axis=0)
    if missing.any():
        names = [m for m, x in zip(graph.mp_ids, missing) if x]
        raise CoverageFailure(f"candidates never see MP(s): {', '.join(names)}",
                              uncovered=names, graph=graph)
    if not graph.mp_ids:
        graph.best = ROOT
        return graph

    rng = np.random.default_rng(cfg.seed)
    n_c = len(graph.candidates)
    q_nearest = ROOT
    for _ in range(cfg.max_iter):
        q_rand = int(rng.integers(n_c))
        if cfg.refresh_before_extend:
            target = graph.positions[q_rand]
            q_nearest = int(np.argmin(np.linalg.norm(graph.node_positions() - target, axis=1)))
        q_new = extend(graph, q_rand, q_nearest, cfg.spacing)
        if q_new is None:
            continue
        q_nearest = find_best_neighbor(graph, q_new, cfg)
        if visible[graph.candidates[q_new].id].n == 0:
            continue  # infeasible pose: nothing visible or in collision
        near = neighbors(graph, q_new, cfg.eps)
        q_min = choose_parent(graph, near, q_new, q_nearest, cfg)
        if q_min is None:
            continue
        node = graph.add(q_new, q_min)
        if graph.nodes[node].covered.all():
            graph.best = node
            return graph
    uncovered = graph.uncovered()
    raise CoverageFailure(
        f"iteration budget {cfg.max_iter} exhausted with {len(uncovered)} MP(s) uncovered",
        uncovered=uncovered, graph=graph,
    )
