"""Reference implementations used only for verification.

These share the state-space, index, and world modules with the planner but
none of its search code: the single-pass baseline keeps explicit
unvisited/open/closed sets and a plain heapq frontier, and the disk-graph
Dijkstra collision-checks every edge up front conceptually (lazily memoized),
giving exact shortest paths on the fully validated graph.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from fmtree.index import NeighborIndex, SampleSet
from fmtree.spaces import StateSpace
from fmtree.world import Snapshot, collision_free


@dataclass
class OracleResult:
    costs: np.ndarray
    parents: np.ndarray
    robot_cost: float


def _predictions(snapshot_or_preds) -> list:
    if snapshot_or_preds is None:
        return []
    if isinstance(snapshot_or_preds, Snapshot):
        return list(snapshot_or_preds.predictions)
    return list(snapshot_or_preds)


def fmt_star(space: StateSpace, samples: SampleSet, radius: float,
             snapshot_or_preds, robot_id: int,
             index: NeighborIndex | None = None) -> OracleResult:
    """Single-pass goal-rooted batch search with the unvisited-set rule.

    Processes each node at most once: a node is connected only while in the
    unvisited set, with the lazily collision-checked Bellman update over open
    neighbors. Terminates when the robot node is extracted or the frontier
    empties.
    """
    preds = _predictions(snapshot_or_preds)
    if index is None:
        index = NeighborIndex(space, samples.states, radius)
    n = samples.count
    states = samples.states
    costs = np.full(n, np.inf)
    parents = np.full(n, -1, dtype=int)
    goal = samples.goal_id

    unvisited = np.ones(n, dtype=bool)
    unvisited[goal] = False
    in_open = np.zeros(n, dtype=bool)
    closed = np.zeros(n, dtype=bool)

    costs[goal] = 0.0
    in_open[goal] = True
    frontier: list[tuple[float, int]] = [(0.0, goal)]

    while frontier:
        cz, z = heapq.heappop(frontier)
        if not in_open[z] or cz > costs[z]:
            continue  # stale entry
        cand_ids, _ = index.near_backward(z)
        opened_this_round: list[int] = []
        for x in cand_ids[unvisited[cand_ids]]:
            x = int(x)
            fwd_ids, fwd_costs = index.near_forward(x)
            usable = in_open[fwd_ids] | (fwd_ids == z)
            if not usable.any():
                continue
            vals = costs[fwd_ids] + fwd_costs
            vals[~usable] = np.inf
            j = np.lexsort((fwd_ids, vals))[0]
            if not math.isfinite(vals[j]):
                continue
            y_min = int(fwd_ids[j])
            traj = space.steer(states[x], states[y_min])
            if traj is None or not collision_free(traj, preds):
                continue
            costs[x] = float(vals[j])
            parents[x] = y_min
            unvisited[x] = False
            opened_this_round.append(x)
        # new connections join the frontier only after the whole round
        for x in opened_this_round:
            in_open[x] = True
            heapq.heappush(frontier, (costs[x], x))
        in_open[z] = False
        closed[z] = True
        if z == robot_id:
            break

    return OracleResult(costs=costs, parents=parents,
                        robot_cost=float(costs[robot_id]))


def dijkstra_disk_graph(space: StateSpace, samples: SampleSet, radius: float,
                        snapshot_or_preds, robot_id: int,
                        index: NeighborIndex | None = None) -> OracleResult:
    """Exact goal-rooted shortest paths over all collision-free radius edges.

    Quadratic-ish in the neighborhood size by design; guarded to small n.
    """
    preds = _predictions(snapshot_or_preds)
    if samples.count > 2000:
        raise ValueError("exact disk-graph oracle is limited to n <= 2000")
    if index is None:
        index = NeighborIndex(space, samples.states, radius)
    n = samples.count
    states = samples.states
    costs = np.full(n, np.inf)
    parents = np.full(n, -1, dtype=int)
    goal = samples.goal_id
    costs[goal] = 0.0
    done = np.zeros(n, dtype=bool)
    frontier: list[tuple[float, int]] = [(0.0, goal)]
    edge_free: dict[tuple[int, int], bool] = {}

    while frontier:
        cy, y = heapq.heappop(frontier)
        if done[y] or cy > costs[y]:
            continue
        done[y] = True
        child_ids, child_costs = index.near_backward(y)
        for x, ecost in zip(child_ids, child_costs):
            x = int(x)
            if done[x]:
                continue
            new = cy + float(ecost)
            if new >= costs[x]:
                continue
            key = (x, y)
            free = edge_free.get(key)
            if free is None:
                traj = space.steer(states[x], states[y])
                free = traj is not None and collision_free(traj, preds)
                edge_free[key] = free
            if not free:
                continue
            costs[x] = new
            parents[x] = y
            heapq.heappush(frontier, (new, x))

    return OracleResult(costs=costs, parents=parents,
                        robot_cost=float(costs[robot_id]))


def analytic_circle_detour(start, goal, center, radius: float) -> float:
    """Shortest planar path from start to goal around one disk (closed form).

    Tangent segment + arc + tangent segment when the straight segment crosses
    the disk; the straight distance otherwise. Endpoints must lie outside.
    """
    s = np.asarray(start, dtype=float)
    g = np.asarray(goal, dtype=float)
    c = np.asarray(center, dtype=float)
    ds = float(np.hypot(*(s - c)))
    dg = float(np.hypot(*(g - c)))
    if ds < radius or dg < radius:
        raise ValueError("endpoints must lie outside the disk")
    straight = float(np.hypot(*(g - s)))

    # distance from the center to the segment start-goal
    sg = g - s
    denom = float(sg @ sg)
    if denom == 0:
        return 0.0
    f = float(np.clip(((c - s) @ sg) / denom, 0.0, 1.0))
    closest = s + f * sg
    if float(np.hypot(*(closest - c))) >= radius:
        return straight

    alpha = math.acos(np.clip(((s - c) @ (g - c)) / (ds * dg), -1.0, 1.0))
    arc = alpha - math.acos(radius / ds) - math.acos(radius / dg)
    if arc < 0:
        return straight
    return (math.sqrt(ds * ds - radius * radius)
            + math.sqrt(dg * dg - radius * radius) + radius * arc)
