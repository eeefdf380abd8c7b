"""Uniform sampling, the connection-radius rule, and cached neighbor queries.

The sample set is fixed for the life of a planner; the kd-tree is built once
over the spatial projection and neighbor lists are cached per node. Timed
spaces use direction-aware queries (who can reach v / who is reachable from v)
built from a spatial prefilter followed by the exact steering kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from fmtree.spaces import ConfigurationError, StateSpace


@dataclass(frozen=True)
class SampleSet:
    """Fixed node states, ids dense 0..count-1; start and goal are appended last."""

    states: np.ndarray
    seed: int
    start_id: int
    goal_id: int

    @property
    def count(self) -> int:
        return len(self.states)


def sample_states(space: StateSpace, n: int, seed: int, start, goal) -> SampleSet:
    """Draw n i.i.d. uniform states and append start and goal.

    Deterministic per seed: the same (space, n, seed) yields bit-identical sets.
    """
    if n < 2:
        raise ConfigurationError("need at least 2 samples")
    if space.measure() <= 0:
        raise ConfigurationError("state space has zero volume")
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    for name, s in (("start", start), ("goal", goal)):
        if s.shape != (space.dim,):
            raise ConfigurationError(f"{name} has wrong dimension")
        if not space.in_bounds(s):
            raise ConfigurationError(f"{name} state outside bounds")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    states = np.vstack([space.sample(rng, n), start[None, :], goal[None, :]])
    return SampleSet(states=states, seed=seed, start_id=n, goal_id=n + 1)


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def gamma_star(d: int, mu_free: float) -> float:
    """Connection-radius constant from the sampling-theory lower bound."""
    return ((2.0 * (1.0 + 1.0 / d)) ** (1.0 / d)
            * (mu_free / unit_ball_volume(d)) ** (1.0 / d))


def compute_radius(n: int, d: int, c_mult: float, mu_free: float) -> float:
    """r_n = C * gamma_star * (ln n / n)^(1/d)."""
    if n < 2:
        raise ConfigurationError("radius rule needs n >= 2")
    if c_mult <= 0:
        raise ConfigurationError("radius multiplier must be > 0")
    return c_mult * gamma_star(d, mu_free) * (math.log(n) / n) ** (1.0 / d)


class NeighborIndex:
    """Static spatial index over the sample set with cached neighbor lists.

    ``near`` is the symmetric proximity query (geometric spaces). For timed
    spaces, ``near_backward(v)`` returns nodes that can reach v and
    ``near_forward(v)`` nodes reachable from v, both within the cost budget.
    """

    def __init__(self, space: StateSpace, states: np.ndarray, radius: float):
        self.space = space
        self.states = np.asarray(states, dtype=float)
        self.radius = float(radius)
        self._tree = cKDTree(space.spatial(self.states))
        self._prefilter_r = space.max_spatial_step(self.radius) * (1 + 1e-9)
        self._near: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._bwd: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._fwd: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    # -- internal ------------------------------------------------------------

    def _spatial_candidates(self, point: np.ndarray) -> np.ndarray:
        idx = self._tree.query_ball_point(point, self._prefilter_r)
        return np.sort(np.asarray(idx, dtype=int))

    def _time_filter(self, cand: np.ndarray, t_ref: float, backward: bool) -> np.ndarray:
        """Keep candidates inside the duration budget (timed-space cost = time)."""
        tc = self.space.time_coord
        dt = (t_ref - self.states[cand, tc]) if backward \
            else (self.states[cand, tc] - t_ref)
        return cand[(dt > 0) & (dt <= self.radius * (1 + 1e-9))]

    def _filter(self, cand: np.ndarray, mask: np.ndarray,
                costs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        keep = mask & (costs <= self.radius * (1 + 1e-9))
        return cand[keep], costs[keep]

    # -- queries ---------------------------------------------------------------

    def near(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        """Symmetric neighbors of node v within the cost radius, excluding v."""
        if self.space.timed:
            raise ConfigurationError("symmetric near() requires a geometric space")
        hit = self._near.get(v)
        if hit is not None:
            return hit
        cand = self._spatial_candidates(self.space.spatial(self.states[v]))
        cand = cand[cand != v]
        mask, costs = self.space.connect_costs(self.states[cand], self.states[v])
        out = self._filter(cand, mask, costs)
        self._near[v] = out
        return out

    def near_backward(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        """Nodes u with a feasible connection u -> v of cost <= radius."""
        if not self.space.timed:
            return self.near(v)
        hit = self._bwd.get(v)
        if hit is not None:
            return hit
        cand = self._spatial_candidates(self.space.spatial(self.states[v]))
        cand = cand[cand != v]
        cand = self._time_filter(cand, self.states[v, self.space.time_coord], True)
        mask, costs = self.space.connect_costs(self.states[cand], self.states[v])
        out = self._filter(cand, mask, costs)
        self._bwd[v] = out
        return out

    def near_forward(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        """Nodes u reachable from v with a connection v -> u of cost <= radius."""
        if not self.space.timed:
            return self.near(v)
        hit = self._fwd.get(v)
        if hit is not None:
            return hit
        cand = self._spatial_candidates(self.space.spatial(self.states[v]))
        cand = cand[cand != v]
        cand = self._time_filter(cand, self.states[v, self.space.time_coord], False)
        mask, costs = self.space.connect_costs_from(self.states[v], self.states[cand])
        out = self._filter(cand, mask, costs)
        self._fwd[v] = out
        return out

    def reachable_from_state(self, state) -> tuple[np.ndarray, np.ndarray]:
        """Forward query from an arbitrary (off-sample) state; not cached."""
        state = np.asarray(state, dtype=float)
        cand = self._spatial_candidates(self.space.spatial(state))
        if self.space.timed:
            cand = self._time_filter(cand, state[self.space.time_coord], False)
            mask, costs = self.space.connect_costs_from(state, self.states[cand])
        else:
            mask, costs = self.space.connect_costs(self.states[cand], state)
        return self._filter(cand, mask, costs)
