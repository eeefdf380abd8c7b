"""Goal-rooted replanning tree: incremental obstacle repair + cost-ordered expansion.

The tree is rooted at the goal with cost-to-come c(goal) = 0. Each tick the
planner diffs the observed obstacle predictions against the previous ones,
prunes the subtrees hanging off newly blocked tree edges, re-queues candidate
repair nodes for edges a vanished obstacle had cut, and then runs a cost-ordered
wavefront expansion whose re-evaluation condition

    c(x) > c(z) + Cost(z, x)

lets previously connected nodes be rewired whenever a cheaper route appears.
Collision checking stays lazy: an edge is validated only after it has been
selected as the best available connection.

In timed spaces the tree grows from the goal backward in time, so the child
search uses the backward-reachable set and the parent search the
forward-reachable set. Geometric spaces use the symmetric neighborhood for
both.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from fmtree.heap import OpenQueue
from fmtree.index import NeighborIndex, SampleSet
from fmtree.spaces import ConfigurationError, StateSpace
from fmtree.world import (
    ObstaclePrediction,
    Snapshot,
    World,
    WorldDiff,
    blocked_by_any,
    collision_free,
    diff,
)

NO_PARENT = -1

# Slack on the re-evaluation inequality: ignores float-noise "improvements"
# so visited nodes are never re-triggered by rounding alone.
_IMPROVE_EPS = 1e-9


class InternalInvariantError(RuntimeError):
    """A structural invariant broke; indicates a planner bug."""


@dataclass
class RepairMetrics:
    """Per-update counters: invalidated nodes, queue insertions, expansions, checks."""

    n_aff: int = 0
    n_c: int = 0
    k: int = 0
    coll_checks: int = 0
    wall_s: float = 0.0


@dataclass
class StepResult:
    t_now: float
    v_robot: int | None
    c_robot: float
    path_ids: list[int]
    metrics: RepairMetrics


@dataclass(frozen=True)
class _EdgeRecord:
    """A tree edge cut by an obstacle, kept so its removal can re-validate it."""

    child: int
    parent: int
    spatial: np.ndarray
    times: np.ndarray


class DynamicFMT:
    """Replanning tree over a fixed sample set (see module docstring)."""

    def __init__(self, space: StateSpace, samples: SampleSet, radius: float,
                 world: World | None = None):
        if radius <= 0:
            raise ConfigurationError("connection radius must be > 0")
        self.space = space
        self.samples = samples
        self.radius = float(radius)
        self.world = world
        self.index = NeighborIndex(space, samples.states, radius)

        n = samples.count
        self.states = samples.states
        self.costs = np.full(n, np.inf)
        self.parent = np.full(n, NO_PARENT, dtype=int)
        self.children: list[set[int]] = [set() for _ in range(n)]
        self.open = OpenQueue()
        self.open_flags = np.zeros(n, dtype=bool)

        self.goal_id = samples.goal_id
        self.start_id = samples.start_id
        for name, sid in (("start", self.start_id), ("goal", self.goal_id)):
            if not space.in_bounds(self.states[sid]):
                raise ConfigurationError(f"{name} state outside bounds")

        self.costs[self.goal_id] = 0.0
        self._queue_insert(self.goal_id, 0.0)

        # dynamic state
        self.obstacles: dict[tuple, ObstaclePrediction] = {}
        self._obs_arrays: tuple | None = None
        self._blocked_cache: dict[tuple, list[_EdgeRecord]] = {}
        self._region_cache: dict[tuple, np.ndarray] = {}
        self._edge_spatial: dict[int, np.ndarray] = {}
        self._edge_times: dict[int, np.ndarray] = {}
        self._edge_reach = np.zeros(n)
        self.prev_snapshot: Snapshot | None = None
        self.t_now = 0.0
        self.metrics = RepairMetrics()

        if space.timed:
            self._times = self.states[:, space.time_coord]
        else:
            self._times = None
        self._linear_motion = space.kind in ("euclid2d", "holonomic_time")

    # -- neighbor access ----------------------------------------------------

    def near_children(self, v: int):
        """Potential children of v: nodes with a feasible connection into v."""
        return self.index.near_backward(v)

    def near_parents(self, v: int):
        """Potential parents of v: nodes v has a feasible connection into."""
        return self.index.near_forward(v)

    # -- queue helpers --------------------------------------------------------

    def _queue_insert(self, node: int, cost: float) -> None:
        self.open.insert(node, cost)
        self.open_flags[node] = True

    def _queue_remove(self, node: int) -> None:
        self.open.remove(node)
        self.open_flags[node] = False

    def _queue_pop(self) -> tuple[int, float]:
        node, cost = self.open.pop()
        self.open_flags[node] = False
        return node, cost

    def _stale(self, node: int) -> bool:
        return self._times is not None and self._times[node] < self.t_now - 1e-9

    # -- vectorized collision predicate ---------------------------------------

    def _obstacle_arrays(self):
        """(p0, v, t0, r_eff) stacked over current predictions, cached."""
        if self._obs_arrays is None:
            preds = [self.obstacles[k] for k in sorted(self.obstacles)]
            if preds:
                self._obs_arrays = (
                    np.array([p.p0 for p in preds]),
                    np.array([p.v for p in preds]),
                    np.array([p.t0 for p in preds]),
                    np.array([p.effective_radius for p in preds]),
                )
            else:
                self._obs_arrays = (np.zeros((0, 2)), np.zeros((0, 2)),
                                    np.zeros(0), np.zeros(0))
        return self._obs_arrays

    def _blocked_raw(self, spatial: np.ndarray, times: np.ndarray) -> bool:
        p0, v, t0, r_eff = self._obstacle_arrays()
        if len(r_eff) == 0:
            return False
        dt = times[None, :] - t0[:, None]
        ox = p0[:, 0, None] + v[:, 0, None] * dt
        oy = p0[:, 1, None] + v[:, 1, None] * dt
        d2 = (spatial[None, :, 0] - ox) ** 2 + (spatial[None, :, 1] - oy) ** 2
        return bool((d2 < (r_eff[:, None] ** 2)).any())

    def _samples_blocked(self, spatial: np.ndarray, times: np.ndarray) -> bool:
        """One collision check of pre-sampled edge points against every obstacle."""
        self.metrics.coll_checks += 1
        return self._blocked_raw(spatial, times)

    def _segment_clear(self, a, b, t_a: float, t_b: float) -> bool:
        """Exact all-clear test for linear edge motion vs linear obstacle motion.

        True only when the true minimum separation exceeds every effective
        radius, in which case the sampled check would also pass; a False means
        "maybe blocked" and defers to the sampled predicate.
        """
        p0, v, t0, r_eff = self._obstacle_arrays()
        if len(r_eff) == 0:
            return True
        ra = np.asarray(a[:2]) - (p0 + v * (t_a - t0)[:, None])
        rb = np.asarray(b[:2]) - (p0 + v * (t_b - t0)[:, None])
        seg = rb - ra
        den = np.einsum("ij,ij->i", seg, seg)
        num = -np.einsum("ij,ij->i", ra, seg)
        f = np.clip(np.divide(num, den, out=np.zeros_like(num),
                              where=den > 0), 0.0, 1.0)
        closest = ra + f[:, None] * seg
        d2 = np.einsum("ij,ij->i", closest, closest)
        return bool((d2 >= r_eff ** 2).all())

    def _edge_check(self, x_state, y_state):
        """(blocked, traj) for the connection x -> y; counts one collision check.

        Linear-motion spaces try the exact clearance test first and skip
        trajectory construction when provably clear (traj is then None and is
        built on demand by the caller).
        """
        self.metrics.coll_checks += 1
        if self._linear_motion:
            t_a = x_state[self.space.time_coord] if self.space.timed else 0.0
            t_b = y_state[self.space.time_coord] if self.space.timed else 0.0
            if self._segment_clear(x_state, y_state, t_a, t_b):
                return False, None
        traj = self.space.steer(x_state, y_state)
        if traj is None:
            raise InternalInvariantError("neighbor edge lost feasibility")
        return self._blocked_raw(traj.spatial(), traj.times), traj

    def _points_clear_mask(self, ids: np.ndarray) -> np.ndarray:
        """False where a node's own position sits inside a current obstacle."""
        p0, v, t0, r_eff = self._obstacle_arrays()
        if len(r_eff) == 0 or len(ids) == 0:
            return np.ones(len(ids), dtype=bool)
        pos = self.space.spatial(self.states[ids])
        times = self._times[ids] if self._times is not None else np.zeros(len(ids))
        dt = times[None, :] - t0[:, None]
        ox = p0[:, 0, None] + v[:, 0, None] * dt
        oy = p0[:, 1, None] + v[:, 1, None] * dt
        d2 = (pos[None, :, 0] - ox) ** 2 + (pos[None, :, 1] - oy) ** 2
        return ~((d2 < (r_eff[:, None] ** 2)).any(axis=0))

    # -- tree maintenance (UpdateParent / GetDescendants) ---------------------

    def update_parent(self, x: int, y_new: int | None) -> None:
        y = NO_PARENT if y_new is None else y_new
        if self.parent[x] == y:
            return
        if self.parent[x] != NO_PARENT:
            self.children[self.parent[x]].discard(x)
        self.parent[x] = y
        if y != NO_PARENT:
            self.children[y].add(x)
        else:
            self._edge_spatial.pop(x, None)
            self._edge_times.pop(x, None)
            self._edge_reach[x] = 0.0

    def get_descendants(self, seeds) -> set[int]:
        seeds = set(int(s) for s in seeds)
        out: set[int] = set()
        stack = sorted(seeds, reverse=True)
        while stack:
            v = stack.pop()
            for ch in sorted(self.children[v], reverse=True):
                if ch not in out and ch not in seeds:
                    out.add(ch)
                    stack.append(ch)
        return out

    def _store_edge(self, child: int, parent: int, traj) -> None:
        """Record the edge geometry needed by the cut scans.

        Straight-line spaces pass traj=None: their polylines are rebuilt on
        demand and the spatial reach is just the endpoint distance. Curved
        spaces store the sampled trajectory (steer produced it anyway).
        """
        if traj is None:
            a = self.space.spatial(self.states[child])
            b = self.space.spatial(self.states[parent])
            self._edge_spatial.pop(child, None)
            self._edge_times.pop(child, None)
            self._edge_reach[child] = float(np.hypot(b[0] - a[0], b[1] - a[1]))
            return
        sp = traj.spatial()
        self._edge_spatial[child] = sp
        self._edge_times[child] = traj.times
        base = self.space.spatial(self.states[child])
        self._edge_reach[child] = float(
            np.hypot(sp[:, 0] - base[0], sp[:, 1] - base[1]).max())

    def _edge_samples(self, child: int) -> tuple[np.ndarray, np.ndarray]:
        """Sampled polyline of the tree edge child -> parent (built lazily)."""
        hit = self._edge_spatial.get(child)
        if hit is not None:
            return hit, self._edge_times[child]
        traj = self.space.steer(self.states[child], self.states[self.parent[child]])
        if traj is None:
            raise InternalInvariantError("stored tree edge lost feasibility")
        return traj.spatial(), traj.times

    # -- obstacle repair (Update/Add/Remove/QueueNeighbors) -------------------

    def update_obstacles(self, d: WorldDiff) -> None:
        """Dispatch: newly appeared predictions first, vanished ones second."""
        if d.added:
            self.add_obstacles(d.added)
        if d.removed:
            self.remove_obstacles(d.removed)

    def _footprint_dists(self, pred: ObstaclePrediction) -> np.ndarray:
        """Distance from every node to the prediction's swept footprint segment."""
        pos = self.space.spatial(self.states)
        a = np.asarray(pred.p0)
        if self.space.timed and (pred.v[0] or pred.v[1]):
            horizon = self.space.params.t_max
            b = np.asarray(pred.positions_at(np.array([horizon]))[0])
        else:
            b = a
        ab = b - a
        denom = float(ab @ ab)
        if denom > 0:
            f = np.clip(((pos - a) @ ab) / denom, 0.0, 1.0)
            closest = a + f[:, None] * ab
        else:
            closest = np.broadcast_to(a, pos.shape)
        return np.hypot(pos[:, 0] - closest[:, 0], pos[:, 1] - closest[:, 1])

    def _candidate_edges(self, pred: ObstaclePrediction) -> np.ndarray:
        """Children whose tree edge could intersect the predicted disk (coarse)."""
        has_edge = self.parent != NO_PARENT
        if not has_edge.any():
            return np.empty(0, dtype=int)
        dist = self._footprint_dists(pred)
        margin = pred.effective_radius + self._edge_reach + 1e-9
        return np.flatnonzero(has_edge & (dist <= margin))

    def _region_nodes(self, pred: ObstaclePrediction) -> np.ndarray:
        """Nodes whose connections could pass through the prediction's footprint."""
        dist = self._footprint_dists(pred)
        margin = pred.effective_radius + self.index._prefilter_r + 1e-9
        return np.flatnonzero(dist <= margin)

    def _segment_clear_of(self, pred: ObstaclePrediction, a, b,
                          t_a: float, t_b: float) -> bool:
        """Exact linear-motion clearance against one prediction."""
        ra = np.asarray(a[:2]) - pred.positions_at(np.array([t_a]))[0]
        rb = np.asarray(b[:2]) - pred.positions_at(np.array([t_b]))[0]
        seg = rb - ra
        den = float(seg @ seg)
        f = min(max(-float(ra @ seg) / den, 0.0), 1.0) if den > 0 else 0.0
        closest = ra + f * seg
        return float(closest @ closest) >= pred.effective_radius ** 2

    def _blocked_tree_edges(self, pred: ObstaclePrediction) -> list[_EdgeRecord]:
        out = []
        tc = self.space.time_coord
        for child in self._candidate_edges(pred):
            child = int(child)
            if self._linear_motion and child not in self._edge_spatial:
                a = self.states[child]
                b = self.states[self.parent[child]]
                t_a = a[tc] if tc is not None else 0.0
                t_b = b[tc] if tc is not None else 0.0
                # provably clear implies the sampled check also passes
                if self._segment_clear_of(pred, a, b, t_a, t_b):
                    continue
            sp, tm = self._edge_samples(child)
            obs = pred.positions_at(tm)
            d2 = (sp[:, 0] - obs[:, 0]) ** 2 + (sp[:, 1] - obs[:, 1]) ** 2
            if (d2 < pred.effective_radius ** 2).any():
                out.append(_EdgeRecord(child, int(self.parent[child]), sp, tm))
        return out

    def add_obstacles(self, preds) -> None:
        for pred in preds:
            self.obstacles[pred.key] = pred
            self._obs_arrays = None
            blocked = self._blocked_tree_edges(pred)
            self._blocked_cache[pred.key] = blocked
            self._region_cache[pred.key] = self._region_nodes(pred)
            cut = {rec.child for rec in blocked}
            cut |= self.get_descendants(cut)
            for x in sorted(cut):
                if x in self.open:
                    self._queue_remove(x)
                self.update_parent(x, None)
                self.costs[x] = np.inf
            self.metrics.n_aff += len(cut)
            self.queue_neighbors(sorted(cut))

    def remove_obstacles(self, preds) -> None:
        """Re-open repair candidates around each vanished prediction.

        Candidates are the endpoints of the tree edges the obstacle had cut
        (re-validated against the remaining obstacles). When the obstacle is
        truly gone (no successor prediction with the same id, as opposed to a
        moved obstacle whose new prediction was just added), its cached
        footprint region is also re-seeded: still-orphaned nodes there get
        another chance, and if the obstacle never cut a tree edge the whole
        region is re-opened, because the connections it was suppressing were
        never tree edges and left no cheaper record.
        """
        for pred in preds:
            self.obstacles.pop(pred.key, None)
            self._obs_arrays = None
            cached = self._blocked_cache.pop(pred.key, [])
            region = self._region_cache.pop(pred.key, np.empty(0, dtype=int))
            seeds: set[int] = set()
            for rec in cached:
                if not blocked_by_any(rec.spatial, rec.times, self.obstacles.values()):
                    seeds.add(rec.child)
                    seeds.add(rec.parent)
            still_tracked = any(k[0] == pred.obstacle_id for k in self.obstacles)
            if len(region) and not still_tracked:
                if cached:
                    orphaned = region[~np.isfinite(self.costs[region])]
                    seeds.update(int(v) for v in orphaned)
                else:
                    seeds.update(int(v) for v in region)
            self.queue_neighbors(sorted(seeds))

    def queue_neighbors(self, nodes) -> None:
        """Open every valid, connected neighbor that could repair the given nodes.

        The useful candidates are the nodes a repair target can steer into
        (its potential parents); expanding any of them re-examines the target.
        """
        for u in nodes:
            u = int(u)
            if self._stale(u):
                continue
            nbr_ids, _ = self.near_parents(u)
            ok = np.isfinite(self.costs[nbr_ids]) & ~self.open_flags[nbr_ids]
            for y in nbr_ids[ok]:
                y = int(y)
                if self._stale(y):
                    continue
                self._queue_insert(y, float(self.costs[y]))
                self.metrics.n_c += 1

    # -- expansion (cost-ordered wavefront) ------------------------------------

    def expand(self, robot_id: int | None = None,
               on_extract=None, on_connect=None) -> None:
        """Process the open queue until the robot's cost can no longer improve.

        With ``robot_id=None`` (or an unreachable robot) the queue drains
        completely. ``on_extract(z, candidate_ids)`` and ``on_connect(x)`` are
        instrumentation hooks used by the verification suites.
        """
        failed: set[tuple[int, int]] = set()
        while len(self.open):
            _, top_cost = self.open.top()
            if robot_id is not None:
                if not (top_cost < self.costs[robot_id] or robot_id in self.open):
                    break
            z, cz = self._queue_pop()
            self.metrics.k += 1

            cand_ids, cand_costs = self.near_children(z)
            trigger = self.costs[cand_ids] > cz + cand_costs + _IMPROVE_EPS
            if self._times is not None:
                trigger &= self._times[cand_ids] >= self.t_now - 1e-9
            selected = cand_ids[trigger]
            if on_extract is not None:
                on_extract(z, selected)
            # nodes sitting inside an obstacle cannot be connected at all;
            # skip them before the parent search
            if len(selected) and self.obstacles:
                selected = selected[self._points_clear_mask(selected)]

            for x in selected:
                x = int(x)
                fwd_ids, fwd_costs = self.near_parents(x)
                usable = self.open_flags[fwd_ids] | (fwd_ids == z)
                vals = self.costs[fwd_ids] + fwd_costs
                usable &= np.isfinite(vals)
                if not usable.any():
                    continue
                # exact cost ties are endemic when cost = duration; break them
                # toward spatially short edges, then by id, for determinism
                px = self.space.spatial(self.states[x])
                pf = self.space.spatial(self.states[fwd_ids])
                spat = np.hypot(pf[:, 0] - px[0], pf[:, 1] - px[1])
                order = np.lexsort((fwd_ids, spat, vals))
                y_min, val_min = -1, np.inf
                for j in order:
                    if not usable[j]:
                        continue
                    y = int(fwd_ids[j])
                    if (x, y) in failed:
                        continue
                    y_min, val_min = y, float(vals[j])
                    break
                if y_min < 0 or val_min >= self.costs[x]:
                    continue
                blocked, traj = self._edge_check(self.states[x], self.states[y_min])
                if blocked:
                    failed.add((x, y_min))
                    continue
                self.costs[x] = val_min
                self.update_parent(x, y_min)
                self._store_edge(x, y_min, None if self._linear_motion else traj)
                if x in self.open:
                    self.open.update(x, val_min)
                else:
                    self._queue_insert(x, val_min)
                if on_connect is not None:
                    on_connect(x)

    # -- robot handling ---------------------------------------------------------

    def snap_robot(self, robot_state) -> int | None:
        """Tree node standing in for the robot: the cheapest finite-cost node it
        can reach collision-free within the connection radius; if none is
        finite yet, the nearest reachable node (so expansion settles there)."""
        ids, costs_to = self.index.reachable_from_state(robot_state)
        if len(ids) == 0:
            return None
        finite = np.isfinite(self.costs[ids])
        for sel in (np.flatnonzero(finite), np.flatnonzero(~finite)):
            if sel.size == 0:
                continue
            if finite[sel[0]]:
                order = sel[np.lexsort((ids[sel], self.costs[ids[sel]]))]
            else:
                order = sel[np.lexsort((ids[sel], costs_to[sel]))]
            for j in order:
                node = int(ids[j])
                traj = self.space.steer(robot_state, self.states[node])
                if traj is None:
                    continue
                if not self._samples_blocked(traj.spatial(), traj.times):
                    return node
        return None

    def plan_step(self, t_now: float, robot_state,
                  clock=time.perf_counter) -> StepResult:
        """One main-loop iteration: snap robot, observe, diff, repair, expand.

        The wall-time metric covers obstacle repair and expansion only;
        ``clock`` is injectable so traces can be made byte-reproducible.
        """
        if self.world is None:
            raise ConfigurationError("plan_step requires a world")
        self.t_now = t_now
        self.metrics = RepairMetrics()
        v_robot = self.snap_robot(robot_state)
        snap = self.world.observe(t_now)
        d = diff(self.prev_snapshot, snap)
        t0 = clock()
        self.update_obstacles(d)
        self.expand(v_robot)
        self.metrics.wall_s = clock() - t0
        self.prev_snapshot = snap
        if v_robot is not None and np.isfinite(self.costs[v_robot]):
            path, cost = self.extract_path(v_robot)
        else:
            path, cost = [], float("inf")
        return StepResult(t_now=t_now, v_robot=v_robot, c_robot=cost,
                          path_ids=path, metrics=self.metrics)

    def extract_path(self, robot_id: int) -> tuple[list[int], float]:
        """Node ids robot -> goal by following parents; empty if disconnected."""
        if not np.isfinite(self.costs[robot_id]):
            return [], float("inf")
        path = [int(robot_id)]
        seen = {int(robot_id)}
        v = int(robot_id)
        while v != self.goal_id:
            v = int(self.parent[v])
            if v == NO_PARENT:
                return [], float("inf")
            if v in seen:
                raise InternalInvariantError("parent cycle detected")
            seen.add(v)
            path.append(v)
        return path, float(self.costs[robot_id])

    # -- introspection helpers (verification suites) ---------------------------

    def tree_edges(self) -> list[tuple[int, int]]:
        """Current (child, parent) pairs."""
        return [(int(c), int(p)) for c, p in enumerate(self.parent) if p != NO_PARENT]

    def check_coherence(self) -> None:
        """Assert queue/flag/tree bidirectional consistency (test support)."""
        members = set(self.open.members())
        flagged = set(np.flatnonzero(self.open_flags).tolist())
        if members != flagged:
            raise InternalInvariantError("open flags diverge from queue")
        if len(members) > self.samples.count:
            raise InternalInvariantError("queue larger than sample set")
        for c, p in enumerate(self.parent):
            if p != NO_PARENT and c not in self.children[p]:
                raise InternalInvariantError("child missing from parent set")
        for p, kids in enumerate(self.children):
            for c in kids:
                if self.parent[c] != p:
                    raise InternalInvariantError("stale child link")
        finite = np.isfinite(self.costs)
        if not finite[self.goal_id] or self.costs[self.goal_id] != 0.0:
            raise InternalInvariantError("goal cost must stay 0")
        for c, p in enumerate(self.parent):
            if p != NO_PARENT and not (finite[c] and finite[p]):
                raise InternalInvariantError("tree edge touching infinite cost")
        # every parented node must chain to the goal without cycles
        rooted = {self.goal_id}
        for c in range(len(self.parent)):
            chain = []
            v = c
            while v != NO_PARENT and v not in rooted:
                chain.append(v)
                v = int(self.parent[v]) if self.parent[v] != NO_PARENT else NO_PARENT
                if len(chain) > len(self.parent):
                    raise InternalInvariantError("parent cycle")
            if v in rooted:
                rooted.update(chain)
            elif chain and self.parent[chain[0]] != NO_PARENT:
                raise InternalInvariantError("tree not rooted at the goal")
