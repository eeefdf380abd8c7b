"""Dynamic disk obstacles: motion, per-step observation, diffing, collision tests.

Obstacles are disks that ping-pong along waypoint polylines at constant speed.
An observation extrapolates each obstacle at its currently observed velocity,
so a prediction changes exactly when the true motion deviates from it (e.g. a
reversal). Geometric worlds observe zero velocity: the predicted disk is just
the current position and every tick of motion shows up as a changed prediction.

Predictions are identified by (obstacle id, quantized trajectory), so a changed
prediction appears as a remove + add pair in the diff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Quantization step for prediction identity keys; absorbs float jitter in
# observed positions/velocities without masking real changes.
_KEY_QUANT = 1e-6


def _quant(x: float) -> int:
    return int(round(x / _KEY_QUANT))


@dataclass(frozen=True)
class ObstacleSpec:
    """A disk obstacle and its motion: back-and-forth along waypoints at constant speed."""

    obstacle_id: int
    radius: float
    inflation: float = 0.0
    waypoints: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    speed: float = 0.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"obstacle {self.obstacle_id}: radius must be > 0")
        if self.inflation < 0:
            raise ValueError(f"obstacle {self.obstacle_id}: inflation must be >= 0")
        if self.speed < 0:
            raise ValueError(f"obstacle {self.obstacle_id}: speed must be >= 0")
        if len(self.waypoints) == 0:
            raise ValueError(f"obstacle {self.obstacle_id}: needs waypoints")

    @property
    def effective_radius(self) -> float:
        return self.radius + self.inflation

    def _arcs(self) -> tuple[np.ndarray, np.ndarray]:
        pts = np.asarray(self.waypoints, dtype=float)
        seg = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        return pts, cum

    def position(self, t: float) -> np.ndarray:
        pts, cum = self._arcs()
        total = cum[-1]
        if total <= 1e-12 or self.speed <= 0:
            return pts[0].copy()
        s = math.fmod(self.speed * t, 2.0 * total)
        if s > total:
            s = 2.0 * total - s
        i = int(np.searchsorted(cum, s, side="right")) - 1
        i = min(max(i, 0), len(pts) - 2)
        seg_len = cum[i + 1] - cum[i]
        f = (s - cum[i]) / seg_len if seg_len > 0 else 0.0
        return pts[i] + f * (pts[i + 1] - pts[i])

    def velocity(self, t: float) -> np.ndarray:
        """Observed velocity at time t (direction of travel on the current leg)."""
        pts, cum = self._arcs()
        total = cum[-1]
        if total <= 1e-12 or self.speed <= 0:
            return np.zeros(2)
        s = math.fmod(self.speed * t, 2.0 * total)
        forward = s <= total
        if not forward:
            s = 2.0 * total - s
        i = int(np.searchsorted(cum, s, side="right")) - 1
        i = min(max(i, 0), len(pts) - 2)
        seg = pts[i + 1] - pts[i]
        seg_len = cum[i + 1] - cum[i]
        if seg_len <= 0:
            return np.zeros(2)
        d = seg / seg_len * self.speed
        return d if forward else -d


@dataclass(frozen=True)
class ObstaclePrediction:
    """A constant-velocity extrapolation of one obstacle from an observation."""

    obstacle_id: int
    effective_radius: float
    p0: tuple[float, float]
    v: tuple[float, float]
    t0: float

    @property
    def key(self) -> tuple:
        # time-independent line representation so an unchanged motion yields a
        # stable key across observation times
        ix = self.p0[0] - self.v[0] * self.t0
        iy = self.p0[1] - self.v[1] * self.t0
        return (self.obstacle_id, _quant(ix), _quant(iy),
                _quant(self.v[0]), _quant(self.v[1]))

    def positions_at(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        dt = times - self.t0
        return np.column_stack([self.p0[0] + self.v[0] * dt,
                                self.p0[1] + self.v[1] * dt])


@dataclass(frozen=True)
class Snapshot:
    """All obstacle predictions observed at one instant."""

    t_now: float
    predictions: tuple[ObstaclePrediction, ...]

    def by_key(self) -> dict[tuple, ObstaclePrediction]:
        return {p.key: p for p in self.predictions}


@dataclass(frozen=True)
class WorldDiff:
    added: tuple[ObstaclePrediction, ...]
    removed: tuple[ObstaclePrediction, ...]

    @property
    def empty(self) -> bool:
        return not self.added and not self.removed


class World:
    """Owns obstacle motion and produces per-tick observations."""

    def __init__(self, obstacles: list[ObstacleSpec], timed: bool):
        self.obstacles = list(obstacles)
        self.timed = timed

    def observe(self, t_now: float) -> Snapshot:
        preds = []
        for ob in self.obstacles:
            pos = ob.position(t_now)
            vel = ob.velocity(t_now) if self.timed else np.zeros(2)
            preds.append(ObstaclePrediction(
                obstacle_id=ob.obstacle_id,
                effective_radius=ob.effective_radius,
                p0=(float(pos[0]), float(pos[1])),
                v=(float(vel[0]), float(vel[1])),
                t0=t_now,
            ))
        return Snapshot(t_now=t_now, predictions=tuple(preds))

    def true_positions(self, t: float) -> np.ndarray:
        if not self.obstacles:
            return np.zeros((0, 2))
        return np.vstack([ob.position(t) for ob in self.obstacles])

    def effective_radii(self) -> np.ndarray:
        return np.array([ob.effective_radius for ob in self.obstacles])


def diff(prev: Snapshot | None, new: Snapshot) -> WorldDiff:
    """Set differences of predictions under the identity key (sorted, deterministic)."""
    prev_map = prev.by_key() if prev is not None else {}
    new_map = new.by_key()
    added = tuple(new_map[k] for k in sorted(new_map.keys() - prev_map.keys()))
    removed = tuple(prev_map[k] for k in sorted(prev_map.keys() - new_map.keys()))
    return WorldDiff(added=added, removed=removed)


def edge_blocked(spatial: np.ndarray, times: np.ndarray,
                 pred: ObstaclePrediction) -> bool:
    """True iff any trajectory sample is inside the predicted disk at its time.

    ``spatial``/``times`` are the interpolated samples of one edge. Geometric
    predictions carry zero velocity, so the sample times are irrelevant there
    and the test degenerates to a static disk check.
    """
    obs = pred.positions_at(times)
    d2 = (spatial[:, 0] - obs[:, 0]) ** 2 + (spatial[:, 1] - obs[:, 1]) ** 2
    return bool((d2 < pred.effective_radius ** 2).any())


def blocked_by_any(spatial: np.ndarray, times: np.ndarray, preds) -> bool:
    for pred in preds:
        if edge_blocked(spatial, times, pred):
            return True
    return False


def collision_free(traj, snapshot_or_preds, metrics=None) -> bool:
    """Check a trajectory against all predicted obstacles; counts one check.

    The trajectory must already be sampled at the configured collision spacing
    (steer() outputs are). Accepts a Snapshot or any iterable of predictions;
    ``metrics`` (when given) gets its ``coll_checks`` counter incremented
    exactly once per call.
    """
    if metrics is not None:
        metrics.coll_checks += 1
    preds = (snapshot_or_preds.predictions
             if isinstance(snapshot_or_preds, Snapshot) else snapshot_or_preds)
    return not blocked_by_any(traj.spatial(), traj.times, preds)
