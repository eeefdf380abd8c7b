"""State spaces and steering functions shared by planner, oracles, and simulator.

Four spaces are supported:

* ``euclid2d``       -- (x, y), cost = arc length
* ``holonomic_time`` -- (x, y, t), speed-bounded straight motion, cost = duration
* ``dubins_time``    -- (x, y, theta, t), min turning radius + speed window, cost = duration
* ``thruster_time``  -- (x, y, vx, vy, t), bounded-acceleration double integrator,
                        cost = duration

Steering is a pure function: identical inputs yield bit-identical trajectories.
Infeasible connections are reported as ``None``, never as an exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

TWO_PI = 2.0 * math.pi

# Spacing between collision-check samples along an edge, in meters.
# An eighth of the customary 2 m obstacle inflation margin.
DEFAULT_COLLISION_SPACING = 0.25

# Relative slack on feasibility comparisons (speed/acceleration limits).
_FEAS_TOL = 1e-9


class ConfigurationError(ValueError):
    """Raised for invalid space parameters or out-of-bounds endpoint states."""


def mod2pi(theta):
    """Normalize an angle (scalar or array) to [0, 2*pi)."""
    return np.mod(theta, TWO_PI)


@dataclass(frozen=True)
class SpaceParams:
    """Bounds and differential limits for a state space.

    ``bounds`` is one (low, high) pair per coordinate, in the coordinate's own
    unit (m, rad, m/s, s). ``t_max`` must match the upper bound of the time
    coordinate for timed spaces.
    """

    bounds: tuple[tuple[float, float], ...]
    v_max: float = 10.0
    v_min: float = 0.0
    rho_min: float = 1.0
    a_max: float = 1.0
    t_max: float = 0.0

    def __post_init__(self):
        for i, (lo, hi) in enumerate(self.bounds):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ConfigurationError(f"bounds[{i}]: must be finite")
            if not lo < hi:
                raise ConfigurationError(f"bounds[{i}]: lower must be < upper")
        if self.v_min > self.v_max:
            raise ConfigurationError("v_min must be <= v_max")
        if self.rho_min <= 0:
            raise ConfigurationError("rho_min must be > 0")
        if self.a_max <= 0:
            raise ConfigurationError("a_max must be > 0")


class Trajectory:
    """A steering result: sampled states with times and a scalar cost.

    ``times`` holds absolute times for timed spaces and the arc-length
    parameter for geometric ones. ``evaluate(f)`` maps fractions in [0, 1] to
    exact on-curve states, so re-interpolation never drifts off the path.
    """

    __slots__ = ("states", "times", "cost", "timed", "length", "_evaluate")

    def __init__(self, states, times, cost, timed, length, evaluate=None):
        self.states = np.asarray(states, dtype=float)
        self.times = np.asarray(times, dtype=float)
        self.cost = float(cost)
        self.timed = timed
        self.length = float(length)
        self._evaluate = evaluate

    @property
    def start(self) -> np.ndarray:
        return self.states[0]

    @property
    def end(self) -> np.ndarray:
        return self.states[-1]

    def spatial(self) -> np.ndarray:
        return self.states[:, :2]

    def resample(self, max_spacing: float) -> "Trajectory":
        return interpolate(self, max_spacing)


def interpolate(traj: Trajectory, max_spacing: float) -> Trajectory:
    """Resample a trajectory so consecutive spatial samples are <= max_spacing apart.

    Both endpoints are always included; a zero-length trajectory collapses to a
    single sample.
    """
    if max_spacing <= 0:
        raise ValueError("max_spacing must be > 0")
    if traj.length <= 1e-12 or traj._evaluate is None:
        if traj.length <= 1e-12:
            return Trajectory(traj.states[:1], traj.times[:1], traj.cost,
                              traj.timed, traj.length, traj._evaluate)
        # No analytic evaluator: fall back to the stored samples.
        return traj
    n_seg = max(1, int(math.ceil(traj.length / max_spacing)))
    for _ in range(6):
        fr = np.linspace(0.0, 1.0, n_seg + 1)
        states, times = traj._evaluate(fr)
        gaps = np.hypot(np.diff(states[:, 0]), np.diff(states[:, 1]))
        if gaps.size == 0 or gaps.max() <= max_spacing * (1 + 1e-9):
            break
        n_seg *= 2
    return Trajectory(states, times, traj.cost, traj.timed, traj.length,
                      traj._evaluate)


def _sampled(evaluate, cost, timed, length, spacing):
    n_seg = max(1, int(math.ceil(length / spacing))) if length > 1e-12 else 1
    fr = np.linspace(0.0, 1.0, n_seg + 1)
    states, times = evaluate(fr)
    return Trajectory(states, times, cost, timed, length, evaluate)


class StateSpace:
    """Shared interface: steering, cost screens, and batched feasibility kernels."""

    kind: str
    dim: int
    timed: bool
    time_coord: int | None

    def __init__(self, params: SpaceParams,
                 collision_spacing: float = DEFAULT_COLLISION_SPACING):
        if len(params.bounds) != self.dim:
            raise ConfigurationError(
                f"{self.kind}: expected {self.dim} coordinate bounds, "
                f"got {len(params.bounds)}")
        if self.timed:
            lo, hi = params.bounds[self.time_coord]
            if lo != 0.0 or not math.isclose(hi, params.t_max):
                raise ConfigurationError(
                    f"{self.kind}: time bounds must be (0, t_max)")
        self.params = params
        self.collision_spacing = collision_spacing

    # -- basic geometry ----------------------------------------------------

    def in_bounds(self, state) -> bool:
        s = np.asarray(state, dtype=float)
        for i, (lo, hi) in enumerate(self.params.bounds):
            if not (lo - 1e-9 <= s[i] <= hi + 1e-9):
                return False
        return True

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo = np.array([b[0] for b in self.params.bounds])
        hi = np.array([b[1] for b in self.params.bounds])
        return rng.uniform(lo, hi, size=(n, self.dim))

    def spatial(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        if states.ndim == 1:
            return states[:2]
        return states[:, :2]

    def measure(self) -> float:
        """Lebesgue measure of the bounded space (product of bound widths)."""
        out = 1.0
        for lo, hi in self.params.bounds:
            out *= hi - lo
        return out

    # -- steering ----------------------------------------------------------

    def steer(self, a, b) -> Trajectory | None:
        raise NotImplementedError

    def cost_estimate(self, a, b) -> float | None:
        raise NotImplementedError

    def connect_costs(self, sources: np.ndarray, target) -> tuple[np.ndarray, np.ndarray]:
        """Feasibility mask and costs for steering source[i] -> target."""
        raise NotImplementedError

    def connect_costs_from(self, source, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Feasibility mask and costs for steering source -> target[i]."""
        raise NotImplementedError

    def max_spatial_step(self, budget: float) -> float:
        """Upper bound on spatial displacement of any connection of cost <= budget."""
        raise NotImplementedError


# ---------------------------------------------------------------------------
# euclid2d
# ---------------------------------------------------------------------------


class Euclid2D(StateSpace):
    kind = "euclid2d"
    dim = 2
    timed = False
    time_coord = None

    def steer(self, a, b) -> Trajectory | None:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        length = float(np.hypot(b[0] - a[0], b[1] - a[1]))

        def evaluate(fr):
            states = a[None, :] + fr[:, None] * (b - a)[None, :]
            return states, fr * length

        return _sampled(evaluate, length, False, length, self.collision_spacing)

    def cost_estimate(self, a, b) -> float | None:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return float(np.hypot(b[0] - a[0], b[1] - a[1]))

    def connect_costs(self, sources, target):
        sources = np.asarray(sources, dtype=float)
        target = np.asarray(target, dtype=float)
        d = np.hypot(sources[:, 0] - target[0], sources[:, 1] - target[1])
        return np.ones(len(sources), dtype=bool), d

    def connect_costs_from(self, source, targets):
        return self.connect_costs(targets, source)

    def max_spatial_step(self, budget: float) -> float:
        return budget


# ---------------------------------------------------------------------------
# holonomic_time
# ---------------------------------------------------------------------------


class HolonomicTime(StateSpace):
    kind = "holonomic_time"
    dim = 3
    timed = True
    time_coord = 2

    def steer(self, a, b) -> Trajectory | None:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        dt = b[2] - a[2]
        dist = float(np.hypot(b[0] - a[0], b[1] - a[1]))
        if abs(dt) <= 1e-12 and dist <= 1e-12:
            return Trajectory(a[None, :], a[2:3], 0.0, True, 0.0)
        if dt <= 0:
            return None
        if dist > self.params.v_max * dt * (1 + _FEAS_TOL):
            return None

        def evaluate(fr):
            states = a[None, :] + fr[:, None] * (b - a)[None, :]
            return states, a[2] + fr * dt

        return _sampled(evaluate, dt, True, dist, self.collision_spacing)

    def cost_estimate(self, a, b) -> float | None:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        dt = b[2] - a[2]
        dist = float(np.hypot(b[0] - a[0], b[1] - a[1]))
        if abs(dt) <= 1e-12 and dist <= 1e-12:
            return 0.0
        if dt <= 0 or dist > self.params.v_max * dt * (1 + _FEAS_TOL):
            return None
        return float(dt)

    def connect_costs(self, sources, target):
        sources = np.asarray(sources, dtype=float)
        target = np.asarray(target, dtype=float)
        dt = target[2] - sources[:, 2]
        dist = np.hypot(sources[:, 0] - target[0], sources[:, 1] - target[1])
        mask = (dt > 1e-12) & (dist <= self.params.v_max * dt * (1 + _FEAS_TOL))
        return mask, dt

    def connect_costs_from(self, source, targets):
        source = np.asarray(source, dtype=float)
        targets = np.asarray(targets, dtype=float)
        dt = targets[:, 2] - source[2]
        dist = np.hypot(targets[:, 0] - source[0], targets[:, 1] - source[1])
        mask = (dt > 1e-12) & (dist <= self.params.v_max * dt * (1 + _FEAS_TOL))
        return mask, dt

    def max_spatial_step(self, budget: float) -> float:
        return self.params.v_max * budget


# ---------------------------------------------------------------------------
# dubins_time
# ---------------------------------------------------------------------------

# Word encodings: turn directions per segment, 0 = straight.
_DUBINS_WORDS = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")
_TURNS = {"L": 1.0, "R": -1.0, "S": 0.0}


def _dubins_candidates(alpha, beta, d):
    """Normalized segment lengths (t, p, q) for all six words, vectorized.

    Infeasible words get inf. alpha/beta/d may be scalars or same-shape arrays.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    d = np.asarray(d, dtype=float)
    sa, ca = np.sin(alpha), np.cos(alpha)
    sb, cb = np.sin(beta), np.cos(beta)
    c_ab = np.cos(alpha - beta)
    inf = np.inf
    out = {}

    with np.errstate(invalid="ignore"):
        # LSL
        p_sq = 2 + d * d - 2 * c_ab + 2 * d * (sa - sb)
        ok = p_sq >= 0
        p = np.sqrt(np.where(ok, p_sq, 0.0))
        tmp = np.arctan2(cb - ca, d + sa - sb)
        t = mod2pi(-alpha + tmp)
        q = mod2pi(beta - tmp)
        out["LSL"] = (np.where(ok, t, inf), np.where(ok, p, inf), np.where(ok, q, inf))

        # RSR
        p_sq = 2 + d * d - 2 * c_ab + 2 * d * (sb - sa)
        ok = p_sq >= 0
        p = np.sqrt(np.where(ok, p_sq, 0.0))
        tmp = np.arctan2(ca - cb, d - sa + sb)
        t = mod2pi(alpha - tmp)
        q = mod2pi(-beta + tmp)
        out["RSR"] = (np.where(ok, t, inf), np.where(ok, p, inf), np.where(ok, q, inf))

        # LSR
        p_sq = -2 + d * d + 2 * c_ab + 2 * d * (sa + sb)
        ok = p_sq >= 0
        p = np.sqrt(np.where(ok, p_sq, 0.0))
        tmp = np.arctan2(-ca - cb, d + sa + sb) - np.arctan2(-2.0, p)
        t = mod2pi(-alpha + tmp)
        q = mod2pi(-mod2pi(beta) + tmp)
        out["LSR"] = (np.where(ok, t, inf), np.where(ok, p, inf), np.where(ok, q, inf))

        # RSL
        p_sq = -2 + d * d + 2 * c_ab - 2 * d * (sa + sb)
        ok = p_sq >= 0
        p = np.sqrt(np.where(ok, p_sq, 0.0))
        tmp = np.arctan2(ca + cb, d - sa - sb) - np.arctan2(2.0, p)
        t = mod2pi(alpha - tmp)
        q = mod2pi(mod2pi(beta) - tmp)
        out["RSL"] = (np.where(ok, t, inf), np.where(ok, p, inf), np.where(ok, q, inf))

        # RLR
        tmp = (6.0 - d * d + 2 * c_ab + 2 * d * (sa - sb)) / 8.0
        ok = np.abs(tmp) <= 1
        p = mod2pi(TWO_PI - np.arccos(np.clip(tmp, -1, 1)))
        t = mod2pi(alpha - np.arctan2(ca - cb, d - sa + sb) + p / 2.0)
        q = mod2pi(alpha - beta - t + p)
        out["RLR"] = (np.where(ok, t, inf), np.where(ok, p, inf), np.where(ok, q, inf))

        # LRL
        tmp = (6.0 - d * d + 2 * c_ab - 2 * d * (sa - sb)) / 8.0
        ok = np.abs(tmp) <= 1
        p = mod2pi(TWO_PI - np.arccos(np.clip(tmp, -1, 1)))
        t = mod2pi(-alpha + np.arctan2(-ca + cb, d + sa - sb) + p / 2.0)
        q = mod2pi(mod2pi(beta) - alpha + mod2pi(-t + p))
        out["LRL"] = (np.where(ok, t, inf), np.where(ok, p, inf), np.where(ok, q, inf))

    return out


def _m2pi(x: float) -> float:
    return x % TWO_PI


def _dubins_words_scalar(alpha: float, beta: float, d: float):
    """Scalar twin of _dubins_candidates (same formulas, math-module speed)."""
    sa, ca = math.sin(alpha), math.cos(alpha)
    sb, cb = math.sin(beta), math.cos(beta)
    c_ab = math.cos(alpha - beta)
    out = {}

    p_sq = 2 + d * d - 2 * c_ab + 2 * d * (sa - sb)
    if p_sq >= 0:
        tmp = math.atan2(cb - ca, d + sa - sb)
        out["LSL"] = (_m2pi(-alpha + tmp), math.sqrt(p_sq), _m2pi(beta - tmp))

    p_sq = 2 + d * d - 2 * c_ab + 2 * d * (sb - sa)
    if p_sq >= 0:
        tmp = math.atan2(ca - cb, d - sa + sb)
        out["RSR"] = (_m2pi(alpha - tmp), math.sqrt(p_sq), _m2pi(-beta + tmp))

    p_sq = -2 + d * d + 2 * c_ab + 2 * d * (sa + sb)
    if p_sq >= 0:
        p = math.sqrt(p_sq)
        tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
        out["LSR"] = (_m2pi(-alpha + tmp), p, _m2pi(-_m2pi(beta) + tmp))

    p_sq = -2 + d * d + 2 * c_ab - 2 * d * (sa + sb)
    if p_sq >= 0:
        p = math.sqrt(p_sq)
        tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
        out["RSL"] = (_m2pi(alpha - tmp), p, _m2pi(_m2pi(beta) - tmp))

    tmp = (6.0 - d * d + 2 * c_ab + 2 * d * (sa - sb)) / 8.0
    if abs(tmp) <= 1:
        p = _m2pi(TWO_PI - math.acos(tmp))
        t = _m2pi(alpha - math.atan2(ca - cb, d - sa + sb) + p / 2.0)
        out["RLR"] = (t, p, _m2pi(alpha - beta - t + p))

    tmp = (6.0 - d * d + 2 * c_ab - 2 * d * (sa - sb)) / 8.0
    if abs(tmp) <= 1:
        p = _m2pi(TWO_PI - math.acos(tmp))
        t = _m2pi(-alpha + math.atan2(-ca + cb, d + sa - sb) + p / 2.0)
        out["LRL"] = (t, p, _m2pi(_m2pi(beta) - alpha + _m2pi(-t + p)))

    return out


def dubins_shortest(q0, q1, rho) -> tuple[float, str, tuple[float, float, float]]:
    """Shortest Dubins path between planar poses; length in meters.

    Returns (length, word, (t, p, q)) with segment lengths normalized by rho.
    """
    dx, dy = float(q1[0] - q0[0]), float(q1[1] - q0[1])
    big_d = math.hypot(dx, dy)
    d = big_d / rho
    theta = math.atan2(dy, dx) if big_d > 1e-300 else 0.0
    alpha = _m2pi(float(q0[2]) - theta)
    beta = _m2pi(float(q1[2]) - theta)
    best = (math.inf, "", (0.0, 0.0, 0.0))
    for word, tpq in _dubins_words_scalar(alpha, beta, d).items():
        total = tpq[0] + tpq[1] + tpq[2]
        if total < best[0]:
            best = (total, word, tpq)
    length, word, tpq = best
    return length * rho, word, tpq


def dubins_lengths(q0s: np.ndarray, q1s: np.ndarray, rho: float) -> np.ndarray:
    """Vectorized shortest Dubins path lengths for pose arrays (broadcastable)."""
    q0s = np.atleast_2d(np.asarray(q0s, dtype=float))
    q1s = np.atleast_2d(np.asarray(q1s, dtype=float))
    q0s, q1s = np.broadcast_arrays(q0s, q1s)
    dx = q1s[:, 0] - q0s[:, 0]
    dy = q1s[:, 1] - q0s[:, 1]
    big_d = np.hypot(dx, dy)
    d = big_d / rho
    theta = np.where(big_d > 1e-300, np.arctan2(dy, dx), 0.0)
    alpha = mod2pi(q0s[:, 2] - theta)
    beta = mod2pi(q1s[:, 2] - theta)
    cands = _dubins_candidates(alpha, beta, d)
    totals = np.stack([np.sum(cands[w], axis=0) for w in _DUBINS_WORDS])
    return totals.min(axis=0) * rho


def _dubins_pose_at(q0, rho, word, tpq, s_norm):
    """Pose(s) along a Dubins path at normalized arc length(s) s_norm (array)."""
    s_norm = np.asarray(s_norm, dtype=float)
    x = np.full(s_norm.shape, q0[0], dtype=float)
    y = np.full(s_norm.shape, q0[1], dtype=float)
    th = np.full(s_norm.shape, q0[2], dtype=float)
    seg_start = 0.0
    px, py, pth = q0[0], q0[1], q0[2]
    for letter, seg_len in zip(word, tpq):
        if seg_len <= 0:
            continue
        local = np.clip(s_norm - seg_start, 0.0, seg_len)
        turn = _TURNS[letter]
        active = s_norm > seg_start
        if turn == 0.0:
            nx = px + local * rho * math.cos(pth)
            ny = py + local * rho * math.sin(pth)
            nth = np.full(local.shape, pth)
        else:
            dth = turn * local
            nx = px + rho * turn * (np.sin(pth + dth) - math.sin(pth))
            ny = py - rho * turn * (np.cos(pth + dth) - math.cos(pth))
            nth = pth + dth
        x = np.where(active, nx, x)
        y = np.where(active, ny, y)
        th = np.where(active, nth, th)
        # advance the segment origin
        if turn == 0.0:
            px = px + seg_len * rho * math.cos(pth)
            py = py + seg_len * rho * math.sin(pth)
        else:
            px = px + rho * turn * (math.sin(pth + turn * seg_len) - math.sin(pth))
            py = py - rho * turn * (math.cos(pth + turn * seg_len) - math.cos(pth))
            pth = pth + turn * seg_len
        seg_start += seg_len
    return x, y, mod2pi(th)


class DubinsTime(StateSpace):
    kind = "dubins_time"
    dim = 4
    timed = True
    time_coord = 3

    def steer(self, a, b) -> Trajectory | None:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        dt = b[3] - a[3]
        same_pose = (np.hypot(b[0] - a[0], b[1] - a[1]) <= 1e-12
                     and abs(mod2pi(b[2]) - mod2pi(a[2])) <= 1e-12)
        if abs(dt) <= 1e-12 and same_pose:
            return Trajectory(a[None, :], a[3:4], 0.0, True, 0.0)
        if dt <= 0:
            return None
        length, word, tpq = dubins_shortest(a[:3], b[:3], self.params.rho_min)
        speed = length / dt
        if not (self.params.v_min * (1 - _FEAS_TOL) <= speed
                <= self.params.v_max * (1 + _FEAS_TOL)):
            return None
        rho = self.params.rho_min
        total_norm = length / rho if length > 0 else 0.0

        def evaluate(fr):
            x, y, th = _dubins_pose_at(a[:3], rho, word, tpq, fr * total_norm)
            t = a[3] + fr * dt
            states = np.column_stack([x, y, th, t])
            if fr[0] == 0.0:
                states[0] = a
            if fr[-1] == 1.0:
                states[-1] = b
            return states, t

        return _sampled(evaluate, dt, True, length, self.collision_spacing)

    def cost_estimate(self, a, b) -> float | None:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        dt = b[3] - a[3]
        if abs(dt) <= 1e-12 and np.allclose(a[:3], b[:3], atol=1e-12):
            return 0.0
        if dt <= 0:
            return None
        if np.hypot(b[0] - a[0], b[1] - a[1]) > self.params.v_max * dt * (1 + _FEAS_TOL):
            return None
        return float(dt)

    def connect_costs(self, sources, target):
        sources = np.asarray(sources, dtype=float)
        target = np.asarray(target, dtype=float)
        dt = target[3] - sources[:, 3]
        lengths = dubins_lengths(sources[:, :3], target[None, :3], self.params.rho_min)
        with np.errstate(invalid="ignore"):
            mask = ((dt > 1e-12)
                    & (lengths <= self.params.v_max * dt * (1 + _FEAS_TOL))
                    & (lengths >= self.params.v_min * dt * (1 - _FEAS_TOL)))
        return mask, dt

    def connect_costs_from(self, source, targets):
        source = np.asarray(source, dtype=float)
        targets = np.asarray(targets, dtype=float)
        dt = targets[:, 3] - source[3]
        lengths = dubins_lengths(source[None, :3], targets[:, :3], self.params.rho_min)
        with np.errstate(invalid="ignore"):
            mask = ((dt > 1e-12)
                    & (lengths <= self.params.v_max * dt * (1 + _FEAS_TOL))
                    & (lengths >= self.params.v_min * dt * (1 - _FEAS_TOL)))
        return mask, dt

    def max_spatial_step(self, budget: float) -> float:
        return self.params.v_max * budget


# ---------------------------------------------------------------------------
# thruster_time
# ---------------------------------------------------------------------------


def _thruster_accels(dx, dv, v0, dt):
    """Two-piece constant accelerations (switch at dt/2) matching (dx, dv).

    Works elementwise on arrays. Returns (a1, a2).
    """
    s = 2.0 * dv / dt
    p = 8.0 * (dx - v0 * dt) / (dt * dt)
    a1 = (p - s) / 2.0
    a2 = (3.0 * s - p) / 2.0
    return a1, a2


class ThrusterTime(StateSpace):
    kind = "thruster_time"
    dim = 5
    timed = True
    time_coord = 4

    def steer(self, a, b) -> Trajectory | None:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        dt = b[4] - a[4]
        if abs(dt) <= 1e-12 and np.allclose(a, b, atol=1e-12):
            return Trajectory(a[None, :], a[4:5], 0.0, True, 0.0)
        if dt <= 0:
            return None
        a_lim = self.params.a_max * (1 + _FEAS_TOL)
        acc = np.empty((2, 2))  # [axis, piece]
        for axis in range(2):
            a1, a2 = _thruster_accels(b[axis] - a[axis], b[2 + axis] - a[2 + axis],
                                      a[2 + axis], dt)
            if abs(a1) > a_lim or abs(a2) > a_lim:
                return None
            acc[axis] = (a1, a2)

        half = dt / 2.0
        v_sw = a[2:4] + acc[:, 0] * half  # velocity at the switch point

        def evaluate(fr):
            tau = fr * dt
            t1 = np.minimum(tau, half)
            t2 = np.maximum(tau - half, 0.0)
            pos = (a[None, :2]
                   + np.outer(t1, a[2:4]) + 0.5 * (t1 * t1)[:, None] * acc[None, :, 0]
                   + np.outer(t2, v_sw) + 0.5 * (t2 * t2)[:, None] * acc[None, :, 1])
            vel = a[None, 2:4] + np.outer(t1, acc[:, 0]) + np.outer(t2, acc[:, 1])
            times = a[4] + tau
            states = np.column_stack([pos, vel, times])
            if fr[0] == 0.0:
                states[0] = a
            if fr[-1] == 1.0:
                states[-1] = b
            return states, times

        # estimate spatial length from fine chords for sampling density
        fr_fine = np.linspace(0.0, 1.0, 33)
        st_fine, _ = evaluate(fr_fine)
        length = float(np.hypot(np.diff(st_fine[:, 0]), np.diff(st_fine[:, 1])).sum())
        return _sampled(evaluate, dt, True, length, self.collision_spacing)

    def cost_estimate(self, a, b) -> float | None:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        dt = b[4] - a[4]
        if abs(dt) <= 1e-12 and np.allclose(a, b, atol=1e-12):
            return 0.0
        if dt <= 0:
            return None
        a_lim = self.params.a_max * (1 + _FEAS_TOL)
        for axis in range(2):
            a1, a2 = _thruster_accels(b[axis] - a[axis], b[2 + axis] - a[2 + axis],
                                      a[2 + axis], dt)
            if abs(a1) > a_lim or abs(a2) > a_lim:
                return None
        return float(dt)

    def _batch_mask(self, src, dst, dt):
        a_lim = self.params.a_max * (1 + _FEAS_TOL)
        ok = dt > 1e-12
        safe_dt = np.where(ok, dt, 1.0)
        for axis in range(2):
            a1, a2 = _thruster_accels(dst[:, axis] - src[:, axis],
                                      dst[:, 2 + axis] - src[:, 2 + axis],
                                      src[:, 2 + axis], safe_dt)
            ok = ok & (np.abs(a1) <= a_lim) & (np.abs(a2) <= a_lim)
        return ok

    def connect_costs(self, sources, target):
        sources = np.asarray(sources, dtype=float)
        target = np.asarray(target, dtype=float)
        dst = np.broadcast_to(target, sources.shape)
        dt = target[4] - sources[:, 4]
        return self._batch_mask(sources, dst, dt), dt

    def connect_costs_from(self, source, targets):
        source = np.asarray(source, dtype=float)
        targets = np.asarray(targets, dtype=float)
        src = np.broadcast_to(source, targets.shape)
        dt = targets[:, 4] - source[4]
        return self._batch_mask(src, targets, dt), dt

    def max_spatial_step(self, budget: float) -> float:
        # per-axis peak mean speed is v_max + a_max * budget / 4
        per_axis = (self.params.v_max + self.params.a_max * budget / 4.0) * budget
        return math.sqrt(2.0) * per_axis


_SPACES = {
    "euclid2d": Euclid2D,
    "holonomic_time": HolonomicTime,
    "dubins_time": DubinsTime,
    "thruster_time": ThrusterTime,
}

SPACE_KINDS = tuple(_SPACES)


def make_space(kind: str, params: SpaceParams,
               collision_spacing: float = DEFAULT_COLLISION_SPACING) -> StateSpace:
    if kind not in _SPACES:
        raise ConfigurationError(f"unknown state space kind: {kind!r}")
    return _SPACES[kind](params, collision_spacing)
