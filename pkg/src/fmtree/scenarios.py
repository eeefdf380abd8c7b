"""Scenario configuration: validated JSON schema plus built-in presets.

A scenario pins everything a trial needs: state space and its limits, sample
count and connection-radius rule, obstacle motion specs, endpoints, and the
simulation loop constants. Presets cover the geometric benchmark grid
(samples x obstacle-count x radius-multiplier) and the three kinodynamic
models at their standard sample counts.

All randomness flows from the scenario seed through named streams: stream 0
feeds sampling (per trial), stream 1 feeds obstacle layout generation, so new
streams never perturb existing ones.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from fmtree.index import compute_radius
from fmtree.spaces import ConfigurationError, SpaceParams, StateSpace, make_space
from fmtree.world import ObstacleSpec, World

SAMPLING_STREAM = 0
SCENARIO_STREAM = 1


class ScenarioError(ValueError):
    """Malformed scenario file or invariant violation; message names the field."""


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    space: str
    bounds: tuple[tuple[float, float], ...]
    start: tuple[float, ...]
    goal: tuple[float, ...]
    samples: int
    c_mult: float
    seed: int = 0
    v_max: float = 10.0
    v_min: float = 0.0
    rho_min: float = 1.0
    a_max: float = 1.0
    t_max: float = 0.0
    mu_free: float | None = None
    obstacles: tuple[dict, ...] = ()
    dt: float = 0.1
    robot_speed: float = 10.0
    trials: int = 30
    goal_tolerance: float = 1.5
    max_stuck_ticks: int = 80
    max_ticks: int | None = None

    def space_params(self) -> SpaceParams:
        return SpaceParams(bounds=self.bounds, v_max=self.v_max, v_min=self.v_min,
                           rho_min=self.rho_min, a_max=self.a_max, t_max=self.t_max)

    def make_space(self) -> StateSpace:
        return make_space(self.space, self.space_params())

    def make_world(self, space: StateSpace) -> World:
        specs = [ObstacleSpec(obstacle_id=i,
                              radius=o["radius"],
                              inflation=o.get("inflation", 0.0),
                              waypoints=tuple(tuple(w) for w in o["waypoints"]),
                              speed=o.get("speed", 0.0))
                 for i, o in enumerate(self.obstacles)]
        return World(specs, timed=space.timed)

    def arena_measure(self) -> float:
        out = 1.0
        for lo, hi in self.bounds:
            out *= hi - lo
        return out

    def radius(self, space: StateSpace) -> float:
        mu = self.mu_free
        if mu is None:
            # spatial arena area: the radius lives in cost units and the
            # obstacles move, so the conservative full-arena measure is used
            mu = 1.0
            for lo, hi in self.bounds[:2]:
                mu *= hi - lo
        return compute_radius(self.samples + 2, space.dim, self.c_mult, mu)

    def trial_sampling_seed(self, trial: int) -> int:
        ss = np.random.SeedSequence(self.seed, spawn_key=(SAMPLING_STREAM, trial))
        return int(ss.generate_state(1)[0])


_FIELD_TYPES = {
    "name": str,
    "space": str,
    "bounds": (list, tuple),
    "start": (list, tuple),
    "goal": (list, tuple),
    "samples": int,
    "c_mult": (int, float),
    "seed": int,
    "v_max": (int, float),
    "v_min": (int, float),
    "rho_min": (int, float),
    "a_max": (int, float),
    "t_max": (int, float),
    "mu_free": (int, float, type(None)),
    "obstacles": (list, tuple),
    "dt": (int, float),
    "robot_speed": (int, float),
    "trials": int,
    "goal_tolerance": (int, float),
    "max_stuck_ticks": int,
    "max_ticks": (int, type(None)),
}

_REQUIRED = ("name", "space", "bounds", "start", "goal", "samples", "c_mult")

_OBSTACLE_FIELDS = {"radius", "inflation", "waypoints", "speed"}


def scenario_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ScenarioError("scenario: expected a JSON object")
    unknown = set(data) - set(_FIELD_TYPES)
    if unknown:
        raise ScenarioError(f"unknown field: {sorted(unknown)[0]}")
    for key in _REQUIRED:
        if key not in data:
            raise ScenarioError(f"missing required field: {key}")
    for key, value in data.items():
        if not isinstance(value, _FIELD_TYPES[key]) or isinstance(value, bool):
            raise ScenarioError(f"{key}: wrong type")
    for i, ob in enumerate(data.get("obstacles", [])):
        if not isinstance(ob, dict):
            raise ScenarioError(f"obstacles[{i}]: expected an object")
        bad = set(ob) - _OBSTACLE_FIELDS
        if bad:
            raise ScenarioError(f"obstacles[{i}].{sorted(bad)[0]}: unknown field")
        if "radius" not in ob or ob["radius"] <= 0:
            raise ScenarioError(f"obstacles[{i}].radius: must be > 0")
        if ob.get("inflation", 0.0) < 0:
            raise ScenarioError(f"obstacles[{i}].inflation: must be >= 0")
        wps = ob.get("waypoints")
        if not wps or not all(isinstance(w, (list, tuple)) and len(w) == 2 for w in wps):
            raise ScenarioError(f"obstacles[{i}].waypoints: need [x, y] pairs")
        if ob.get("speed", 0.0) < 0:
            raise ScenarioError(f"obstacles[{i}].speed: must be >= 0")

    cfg = ScenarioConfig(
        name=data["name"],
        space=data["space"],
        bounds=tuple(tuple(float(x) for x in b) for b in data["bounds"]),
        start=tuple(float(x) for x in data["start"]),
        goal=tuple(float(x) for x in data["goal"]),
        samples=data["samples"],
        c_mult=float(data["c_mult"]),
        seed=data.get("seed", 0),
        v_max=float(data.get("v_max", 10.0)),
        v_min=float(data.get("v_min", 0.0)),
        rho_min=float(data.get("rho_min", 1.0)),
        a_max=float(data.get("a_max", 1.0)),
        t_max=float(data.get("t_max", 0.0)),
        mu_free=None if data.get("mu_free") is None else float(data["mu_free"]),
        obstacles=tuple(dict(o) for o in data.get("obstacles", ())),
        dt=float(data.get("dt", 0.1)),
        robot_speed=float(data.get("robot_speed", 10.0)),
        trials=data.get("trials", 30),
        goal_tolerance=float(data.get("goal_tolerance", 1.5)),
        max_stuck_ticks=data.get("max_stuck_ticks", 80),
        max_ticks=data.get("max_ticks"),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ScenarioConfig) -> None:
    try:
        space = cfg.make_space()
    except ConfigurationError as e:
        raise ScenarioError(str(e)) from e
    for nm, st in (("start", cfg.start), ("goal", cfg.goal)):
        if len(st) != space.dim:
            raise ScenarioError(f"{nm}: expected {space.dim} coordinates")
        if not space.in_bounds(st):
            raise ScenarioError(f"{nm}: outside bounds")
    if cfg.samples < 2:
        raise ScenarioError("samples: must be >= 2")
    if cfg.c_mult <= 0:
        raise ScenarioError("c_mult: must be > 0")
    if cfg.dt <= 0:
        raise ScenarioError("dt: must be > 0")
    if cfg.trials < 1:
        raise ScenarioError("trials: must be >= 1")
    if space.timed and cfg.goal[space.time_coord] <= cfg.start[space.time_coord]:
        raise ScenarioError("goal: time must exceed start time")


def load_scenario(path) -> ScenarioConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"malformed scenario file {path}: {e}") from e
    return scenario_from_dict(data)


def save_scenario(cfg: ScenarioConfig, path) -> None:
    data = asdict(cfg)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return asdict(cfg)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

_N_LABELS = {2500: "2.5k", 5000: "5k", 10000: "10k", 20000: "20k"}
_C_LABELS = {1.0: "1", 1.5: "1.5", 2.0: "2"}

ARENA = ((-50.0, 50.0), (-50.0, 50.0))


def _layout_obstacles(count, seed, speed_range, radius=2.0, inflation=2.0,
                      leg_range=(20.0, 40.0), keepout=8.0):
    """Deterministic back-and-forth obstacle layout, clear of start/goal."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(SCENARIO_STREAM,)))
    corners = np.array([[-40.0, -40.0], [40.0, 40.0]])
    out = []
    while len(out) < count:
        a = rng.uniform(-42, 42, 2)
        ang = rng.uniform(0, 2 * math.pi)
        leg = rng.uniform(*leg_range)
        b = a + leg * np.array([math.cos(ang), math.sin(ang)])
        b = np.clip(b, -46, 46)
        speed = float(rng.uniform(*speed_range))
        # keep segment endpoints off the robot's endpoints
        seg = np.vstack([a, b])
        if min(np.hypot(*(seg - c).T).min() for c in corners) < keepout:
            continue
        out.append({"radius": radius, "inflation": inflation,
                    "waypoints": [[float(a[0]), float(a[1])],
                                  [float(b[0]), float(b[1])]],
                    "speed": speed})
    return tuple(out)


def _geo_preset(n, obs, c, seed=0, speed_range=(3.0, 6.0)) -> ScenarioConfig:
    return ScenarioConfig(
        name=f"geo-{obs}obs-{_N_LABELS[n]}-c{_C_LABELS[c]}",
        space="euclid2d",
        bounds=ARENA,
        start=(-40.0, -40.0),
        goal=(40.0, 40.0),
        samples=n,
        c_mult=c,
        seed=seed,
        obstacles=_layout_obstacles(obs, seed, speed_range),
        dt=0.1,
        robot_speed=10.0,
        trials=30,
    )


def _timed_bounds(space: str, t_max: float, v_max: float) -> tuple:
    if space == "holonomic_time":
        return ARENA + ((0.0, t_max),)
    if space == "dubins_time":
        return ARENA + ((0.0, 2 * math.pi), (0.0, t_max))
    if space == "thruster_time":
        return ARENA + ((-v_max, v_max), (-v_max, v_max), (0.0, t_max))
    raise ScenarioError(f"not a timed space: {space}")


# effective radius-rule measures for the timed presets, calibrated so the
# duration-cost ball holds a log-sized neighbor set (the unit-ball form of the
# radius rule does not model reachability cones); see README
_KINO_MU = {"holonomic_time": 2500.0, "dubins_time": 10000.0,
            "thruster_time": 500000.0}


def _kino_preset(space, n, obs, seed=0) -> ScenarioConfig:
    t_max = 36.0
    v_max = 6.0 if space == "thruster_time" else 15.0
    common = dict(
        space=space,
        samples=n,
        c_mult=2.0,
        seed=seed,
        mu_free=_KINO_MU[space],
        obstacles=_layout_obstacles(obs, seed, (20.0, 30.0)),
        dt=0.1,
        trials=30,
        t_max=t_max,
        v_max=v_max,
        goal_tolerance=3.0,
        max_stuck_ticks=150,
    )
    short = {"holonomic_time": "holonomic", "dubins_time": "dubins",
             "thruster_time": "thruster"}[space]
    name = f"kino-{short}-{obs}obs"
    if space == "holonomic_time":
        return ScenarioConfig(name=name, bounds=_timed_bounds(space, t_max, v_max),
                              start=(-40.0, -40.0, 0.0), goal=(40.0, 40.0, t_max),
                              **common)
    if space == "dubins_time":
        return ScenarioConfig(name=name, bounds=_timed_bounds(space, t_max, v_max),
                              start=(-40.0, -40.0, math.pi / 4, 0.0),
                              goal=(40.0, 40.0, math.pi / 4, t_max),
                              v_min=1.0, rho_min=2.0, **common)
    return ScenarioConfig(name=name, bounds=_timed_bounds(space, t_max, v_max),
                          start=(-40.0, -40.0, 0.0, 0.0, 0.0),
                          goal=(40.0, 40.0, 0.0, 0.0, t_max),
                          a_max=8.0, **common)


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def get_preset(name: str) -> ScenarioConfig:
    if name not in _PRESETS:
        raise ScenarioError(f"unknown preset: {name}")
    return _PRESETS[name]


def grid_presets(name: str) -> list[ScenarioConfig]:
    """Preset collections: 'geo-grid' is the full benchmark grid."""
    if name == "geo-grid":
        return [p for k, p in sorted(_PRESETS.items()) if k.startswith("geo-") and "obs" in k
                and k != "geo-default"]
    if name == "kino-grid":
        return [p for k, p in sorted(_PRESETS.items()) if k.startswith("kino-")]
    if name in _PRESETS:
        return [_PRESETS[name]]
    raise ScenarioError(f"unknown preset or grid: {name}")


_PRESETS: dict[str, ScenarioConfig] = {}
for _n in (2500, 5000, 10000, 20000):
    for _obs in (10, 20, 30):
        for _c in (1.0, 1.5, 2.0):
            _p = _geo_preset(_n, _obs, _c)
            _PRESETS[_p.name] = _p
for _space in ("holonomic_time", "dubins_time", "thruster_time"):
    for _obs in (10, 20):
        _p = _kino_preset(_space, {"holonomic_time": 5000, "dubins_time": 2500,
                                   "thruster_time": 1000}[_space], _obs)
        _PRESETS[_p.name] = _p
_PRESETS["geo-default"] = replace(_geo_preset(2500, 10, 1.5), name="geo-default")
