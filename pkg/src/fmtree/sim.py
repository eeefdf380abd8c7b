"""Closed-loop simulation: robot motion, obstacle advancement, per-tick replanning.

Each tick the planner observes, repairs, and expands; the robot then tracks the
current path for one time step. Geometric robots advance along the path
polyline at constant speed; timed robots ride the state-time trajectory. A
trial ends when the robot reaches the goal, the horizon runs out, or the robot
has been stranded too long.

Per-trial metrics follow the median-of-per-trial-medians scheme: each trial is
summarized by its median replanning time, and a condition by the median and
standard deviation of those per-trial medians.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from fmtree.index import sample_states
from fmtree.planner import DynamicFMT
from fmtree.scenarios import ScenarioConfig
from fmtree.world import World, collision_free


class TrialError(RuntimeError):
    """The trial could not start (e.g. endpoints inside an obstacle)."""


@dataclass
class IterationRecord:
    index: int
    t_now: float
    replan_s: float
    n_aff: int
    n_c: int
    k: int
    coll_checks: int
    c_robot: float
    path_len: float


@dataclass
class TrialResult:
    scenario: str
    seed: int
    outcome: str                  # reached | timeout | stuck
    records: list[IterationRecord]
    violations: int = 0
    reached_time: float = math.nan

    @property
    def median_replan_s(self) -> float:
        return float(np.median([r.replan_s for r in self.records]))


@dataclass
class SummaryStats:
    scenario: str
    trials: int
    per_trial_median_s: list[float]
    success_rate: float

    @property
    def median_s(self) -> float:
        return float(np.median(self.per_trial_median_s))

    @property
    def std_s(self) -> float:
        # population std: well defined for a single trial
        return float(np.std(self.per_trial_median_s))


def build_trial(cfg: ScenarioConfig, seed: int):
    """Space, world, planner, and initial robot state for one trial."""
    space = cfg.make_space()
    world = cfg.make_world(space)
    start = np.asarray(cfg.start, dtype=float)
    goal = np.asarray(cfg.goal, dtype=float)
    positions = world.true_positions(0.0)
    radii = world.effective_radii()
    for name, st in (("start", start), ("goal", goal)):
        if len(positions) and (np.hypot(*(positions - space.spatial(st)).T) < radii).any():
            raise TrialError(f"{name} lies inside an obstacle at t=0")
    samples = sample_states(space, cfg.samples, cfg.trial_sampling_seed(seed),
                            start, goal)
    planner = DynamicFMT(space, samples, cfg.radius(space), world=world)
    return space, world, planner, start


def _path_states(planner, path_ids):
    return [planner.states[i] for i in path_ids]


def _advance_geometric(pos, path_pts, dist):
    """Move dist along [pos, *path_pts]; returns the new position."""
    cur = np.asarray(pos, dtype=float)
    remaining = dist
    for target in path_pts:
        target = np.asarray(target[:2], dtype=float)
        gap = float(np.hypot(*(target - cur)))
        if gap >= remaining:
            if gap > 0:
                cur = cur + (target - cur) * (remaining / gap)
            return cur
        cur = target
        remaining -= gap
    return cur


def _evade(pos, nxt, world, t_next, step, standoff):
    """Safety governor for the geometric robot: planned and checked clearances
    are both the inflated radius, so a disk can advance over a boundary-hugging
    robot between ticks; step radially away from the worst offender instead of
    entering its standoff band."""
    tp = world.true_positions(t_next)
    if not len(tp):
        return nxt
    gaps = np.hypot(*(tp - nxt).T) - world.effective_radii()
    j = int(np.argmin(gaps))
    if gaps[j] >= standoff:
        return nxt
    away = np.asarray(pos, dtype=float) - tp[j]
    norm = float(np.hypot(*away))
    away = away / norm if norm > 1e-9 else np.array([1.0, 0.0])
    return np.asarray(pos, dtype=float) + away * step


class _TimedTracker:
    """Commitment-based tracking for state-time paths.

    The robot rides one vetted connector trajectory to its target node, then
    follows tree edges (which the planner keeps collision-free against the
    current predictions). The connector is rebuilt only when the target is
    orphaned, passed, or the remaining connector gets blocked.
    """

    def __init__(self, space, planner):
        self.space = space
        self.planner = planner
        self.target: int | None = None
        self.connector = None  # Trajectory robot -> target

    def _target_valid(self, t_now: float) -> bool:
        tc = self.space.time_coord
        return (self.target is not None
                and np.isfinite(self.planner.costs[self.target])
                and self.planner.states[self.target][tc] > t_now + 1e-9)

    def _connector_clear(self, t_now: float) -> bool:
        keep = self.connector.times >= t_now - 1e-9
        if not keep.any():
            return True
        return not self.planner._blocked_raw(self.connector.spatial()[keep],
                                             self.connector.times[keep])

    def _pick_target(self, robot):
        """Re-anchor on a connected node the robot can reach collision-free.

        All complete paths cost the same in a fixed-arrival-time formulation,
        so the anchor supplies the progress pressure: while some candidate
        still needs only a comfortable fraction of the speed budget, chase the
        one spatially closest to the goal; otherwise fall back to the one
        minimizing the average speed still required (maximum slack)."""
        planner = self.planner
        ids, _ = planner.index.reachable_from_state(robot)
        if len(ids) == 0:
            return None
        ids = ids[np.isfinite(planner.costs[ids])]
        if len(ids) == 0:
            return None
        goal_sp = self.space.spatial(planner.states[planner.goal_id])
        pos = self.space.spatial(planner.states[ids])
        dist = np.hypot(pos[:, 0] - goal_sp[0], pos[:, 1] - goal_sp[1])
        slack = planner.costs[ids]  # time remaining on the tree path
        need = np.divide(dist, slack, out=np.zeros_like(dist), where=slack > 1e-9)
        comfortable = need <= 0.5 * self.space.params.v_max
        order = np.lexsort((ids, need))
        if comfortable.any():
            chase = np.lexsort((ids[comfortable], dist[comfortable]))
            order = np.concatenate([np.flatnonzero(comfortable)[chase],
                                    np.flatnonzero(~comfortable)[
                                        np.lexsort((ids[~comfortable],
                                                    need[~comfortable]))]])
        for j in order:
            node = int(ids[j])
            traj = self.space.steer(robot, planner.states[node])
            if traj is None:
                continue
            if not planner._blocked_raw(traj.spatial(), traj.times):
                self.target = node
                self.connector = traj
                return node
        return None

    def _shortcut(self, robot) -> None:
        """Pure pursuit: retarget the farthest node on the committed chain that
        the robot can steer to directly and collision-free. Collapses the
        spatial wander of cost-degenerate state-time paths."""
        planner = self.planner
        tc = self.space.time_coord
        horizon = float(robot[tc]) + planner.radius
        chain = []
        node = self.target
        while node is not None and node >= 0:
            t_node = float(planner.states[node][tc])
            if t_node > horizon:
                break
            chain.append(node)
            if node == planner.goal_id:
                break
            node = int(planner.parent[node])
            if node < 0:
                break
        for cand in reversed(chain[1:]):
            traj = self.space.steer(robot, planner.states[cand])
            if traj is None:
                continue
            if not planner._blocked_raw(traj.spatial(), traj.times):
                self.target = cand
                self.connector = traj
                return

    def advance(self, robot, v_robot: int | None, t_target: float):
        """Robot state at t_target, or None when stranded."""
        tc = self.space.time_coord
        t_now = float(robot[tc])
        rebuilt = False
        if not self._target_valid(t_now) or not self._connector_clear(t_now):
            self.target = None
            self.connector = None
            if self._pick_target(robot) is None:
                return None
            rebuilt = True
        self._ticks = getattr(self, "_ticks", 0) + 1
        if rebuilt or self._ticks % 5 == 0:
            self._shortcut(robot)
        # ride the connector, then walk tree edges past the target
        while True:
            node_state = self.planner.states[self.target]
            t_b = float(node_state[tc])
            if t_target <= t_b + 1e-12:
                traj = self.connector
                t_a = float(traj.start[tc])
                if traj.cost <= 1e-12:
                    return np.array(node_state, dtype=float)
                fr = min(max((t_target - t_a) / (t_b - t_a), 0.0), 1.0)
                states, _ = traj._evaluate(np.array([fr]))
                return states[0]
            nxt = int(self.planner.parent[self.target])
            if nxt < 0:
                return np.array(node_state, dtype=float)  # at the root
            traj = self.space.steer(node_state, self.planner.states[nxt])
            if traj is None:
                return None
            self.target = nxt
            self.connector = traj


def _halt_state(space, robot_state, t_new):
    out = np.array(robot_state, dtype=float)
    if space.timed:
        out[space.time_coord] = t_new
        if space.kind == "thruster_time":
            out[2:4] = 0.0
    return out


def run_trial(cfg: ScenarioConfig, seed: int, clock=time.perf_counter,
              on_tick=None) -> TrialResult:
    """One deterministic closed-loop trial for (cfg, seed)."""
    space, world, planner, robot = build_trial(cfg, seed)
    goal_sp = space.spatial(np.asarray(cfg.goal, dtype=float))
    radii = world.effective_radii()
    if cfg.max_ticks is not None:
        max_ticks = cfg.max_ticks
    elif space.timed:
        max_ticks = int(cfg.t_max / cfg.dt) + 2
    else:
        max_ticks = 3000

    records: list[IterationRecord] = []
    outcome = "timeout"
    violations = 0
    reached_time = math.nan
    stranded = 0
    t_now = 0.0
    tracker = _TimedTracker(space, planner) if space.timed else None
    max_obs_speed = max((ob.speed for ob in world.obstacles), default=0.0)
    standoff = 1.2 * max_obs_speed * cfg.dt

    for it in range(max_ticks):
        step = planner.plan_step(t_now, robot, clock=clock)
        path = step.path_ids
        pts = _path_states(planner, path)
        path_len = 0.0
        if pts:
            chain = [space.spatial(np.asarray(robot))] + [space.spatial(p) for p in pts]
            path_len = float(sum(np.hypot(*(b - a)) for a, b in zip(chain, chain[1:])))
        records.append(IterationRecord(
            index=it, t_now=t_now, replan_s=step.metrics.wall_s,
            n_aff=step.metrics.n_aff, n_c=step.metrics.n_c, k=step.metrics.k,
            coll_checks=step.metrics.coll_checks, c_robot=step.c_robot,
            path_len=path_len))
        if on_tick is not None:
            on_tick(planner, step, robot)

        t_next = t_now + cfg.dt
        if space.timed:
            nxt = tracker.advance(np.asarray(robot, dtype=float), step.v_robot, t_next)
            if nxt is not None:
                stranded = 0
                robot = nxt
            else:
                stranded += 1
                robot = _halt_state(space, robot, t_next)
        else:
            if pts:
                stranded = 0
                nxt = _advance_geometric(robot, [space.spatial(p) for p in pts],
                                         cfg.robot_speed * cfg.dt)
            else:
                stranded += 1
                nxt = np.asarray(robot, dtype=float)
            robot = _evade(robot, nxt, world, t_next,
                           cfg.robot_speed * cfg.dt, standoff)
        t_now = t_next

        pos = space.spatial(np.asarray(robot, dtype=float))
        tp = world.true_positions(t_now)
        if len(tp) and (np.hypot(*(tp - pos).T) < radii).any():
            violations += 1
        if float(np.hypot(*(goal_sp - pos))) <= cfg.goal_tolerance:
            outcome = "reached"
            reached_time = t_now
            break
        if stranded > cfg.max_stuck_ticks:
            outcome = "stuck"
            break
        if space.timed and t_next >= cfg.t_max:
            outcome = "timeout"
            break

    return TrialResult(scenario=cfg.name, seed=seed, outcome=outcome,
                       records=records, violations=violations,
                       reached_time=reached_time)


def _trial_worker(args):
    cfg, seed = args
    return run_trial(cfg, seed)


def run_condition(cfg: ScenarioConfig, trials: int | None = None,
                  workers: int = 1, clock=time.perf_counter,
                  on_trial=None) -> tuple[SummaryStats, list[TrialResult]]:
    """Independent trials with seeds 0..trials-1, aggregated per-trial-median."""
    trials = cfg.trials if trials is None else trials
    if trials < 1:
        raise ValueError("trials must be >= 1")
    results: list[TrialResult] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial_worker, [(cfg, s) for s in range(trials)]))
    else:
        for s in range(trials):
            results.append(run_trial(cfg, s, clock=clock))
    if on_trial is not None:
        for r in results:
            on_trial(r)
    medians = [r.median_replan_s for r in results]
    success = sum(1 for r in results if r.outcome == "reached") / trials
    return SummaryStats(scenario=cfg.name, trials=trials,
                        per_trial_median_s=medians,
                        success_rate=success), results
