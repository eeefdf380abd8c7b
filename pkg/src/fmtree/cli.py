"""Command-line interface: single trials, benchmark grids, and verification.

Subcommands:

* ``plan``   -- run one trial and write a per-iteration trace CSV
* ``bench``  -- run a preset (or preset grid) over repeated trials and write a
               summary CSV with one row per condition
* ``verify`` -- run the built-in oracle/property suites and exit nonzero on
               any failure

Trace schema:   trial,iter,t_now,replan_ms,n_aff,n_c,k,coll_checks,c_robot,path_len,outcome
Summary schema: space,n,c_mult,obstacles,trials,median_ms,std_ms,success_rate
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from pathlib import Path

import numpy as np

TRACE_HEADER = ["trial", "iter", "t_now", "replan_ms", "n_aff", "n_c", "k",
                "coll_checks", "c_robot", "path_len", "outcome"]
SUMMARY_HEADER = ["space", "n", "c_mult", "obstacles", "trials", "median_ms",
                  "std_ms", "success_rate"]


def _fixed_clock():
    return 0.0


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return format(x, ".9g")


def write_trace(path, results) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for res in results:
            for rec in res.records:
                w.writerow([res.seed, rec.index, format(rec.t_now, ".3f"),
                            format(rec.replan_s * 1000.0, ".6f"),
                            rec.n_aff, rec.n_c, rec.k, rec.coll_checks,
                            _fmt(rec.c_robot), _fmt(rec.path_len), res.outcome])


def write_summary(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for cfg, stats in rows:
            w.writerow([cfg.space, cfg.samples, _fmt(cfg.c_mult),
                        len(cfg.obstacles), stats.trials,
                        format(stats.median_s * 1000.0, ".6f"),
                        format(stats.std_s * 1000.0, ".6f"),
                        _fmt(stats.success_rate)])


def _resolve_config(args):
    from fmtree.scenarios import get_preset, load_scenario, scenario_from_dict, scenario_to_dict

    if args.scenario and args.preset:
        raise SystemExit2("--scenario and --preset conflict; give one")
    if args.scenario:
        cfg = load_scenario(args.scenario)
    elif args.preset:
        cfg = get_preset(args.preset)
    else:
        raise SystemExit2("need --scenario or --preset")
    overrides = {}
    if args.samples is not None:
        overrides["samples"] = args.samples
    if args.c_mult is not None:
        overrides["c_mult"] = args.c_mult
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if overrides:
        data = scenario_to_dict(cfg)
        data.update(overrides)
        cfg = scenario_from_dict(data)
    return cfg


class SystemExit2(SystemExit):
    def __init__(self, msg: str):
        print(f"error: {msg}", file=sys.stderr)
        super().__init__(2)


def cmd_plan(args) -> int:
    from fmtree.sim import run_trial

    cfg = _resolve_config(args)
    clock = _fixed_clock if args.clock == "fixed" else time.perf_counter
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res = run_trial(cfg, cfg.seed, clock=clock)
    trace = out / f"trace-{cfg.name}-seed{cfg.seed}.csv"
    write_trace(trace, [res])
    print(f"{cfg.name}: outcome={res.outcome} iterations={len(res.records)} "
          f"violations={res.violations}")
    print(f"trace written to {trace}")
    return 0


def cmd_bench(args) -> int:
    from fmtree.scenarios import grid_presets
    from fmtree.sim import run_condition

    if args.scenario:
        cfgs = [_resolve_config(args)]
    else:
        cfgs = grid_presets(args.preset)
        overrides = {}
        if args.trials is not None:
            overrides["trials"] = args.trials
        if args.samples is not None:
            overrides["samples"] = args.samples
        if args.seed is not None:
            overrides["seed"] = args.seed
        if overrides:
            from fmtree.scenarios import scenario_from_dict, scenario_to_dict
            patched = []
            for cfg in cfgs:
                data = scenario_to_dict(cfg)
                data.update(overrides)
                patched.append(scenario_from_dict(data))
            cfgs = patched
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for cfg in cfgs:
        stats, results = run_condition(cfg, workers=args.workers)
        rows.append((cfg, stats))
        print(f"{cfg.name}: median={stats.median_s*1000:.3f} ms "
              f"std={stats.std_s*1000:.3f} ms success={stats.success_rate:.2f}")
        if args.traces:
            write_trace(out / f"trace-{cfg.name}.csv", results)
    summary = out / "summary.csv"
    write_summary(summary, rows)
    print(f"summary written to {summary}")
    return 0


def cmd_verify(args) -> int:
    failures = 0
    for name, fn in _VERIFY_SUITES:
        try:
            fn()
            print(f"PASS {name}")
        except Exception as e:  # noqa: BLE001 - report and continue
            failures += 1
            print(f"FAIL {name}: {e}")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# verification suites (fast, self-contained)
# ---------------------------------------------------------------------------


def _verify_steering():
    from fmtree.spaces import SpaceParams, make_space

    rng = np.random.default_rng(0)
    spaces = [
        make_space("euclid2d", SpaceParams(bounds=((-50, 50), (-50, 50)))),
        make_space("holonomic_time", SpaceParams(
            bounds=((-50, 50), (-50, 50), (0, 30)), v_max=12, t_max=30)),
        make_space("dubins_time", SpaceParams(
            bounds=((-50, 50), (-50, 50), (0, 2 * math.pi), (0, 30)),
            v_max=15, v_min=1, rho_min=2, t_max=30)),
        make_space("thruster_time", SpaceParams(
            bounds=((-50, 50), (-50, 50), (-8, 8), (-8, 8), (0, 30)),
            v_max=8, a_max=6, t_max=30)),
    ]
    for sp in spaces:
        for _ in range(200):
            a, b = sp.sample(rng, 2)
            t1, t2 = sp.steer(a, b), sp.steer(a, b)
            if (t1 is None) != (t2 is None):
                raise AssertionError("steer not reproducible")
            if t1 is None:
                continue
            if not np.array_equal(t1.states, t2.states):
                raise AssertionError("steer not bit-identical")
            est = sp.cost_estimate(a, b)
            if est is None or est > t1.cost + 1e-9:
                raise AssertionError("estimate exceeds steering cost")


def _verify_near_duality():
    from fmtree.index import NeighborIndex
    from fmtree.spaces import SpaceParams, make_space

    rng = np.random.default_rng(1)
    sp = make_space("holonomic_time", SpaceParams(
        bounds=((-50, 50), (-50, 50), (0, 30)), v_max=12, t_max=30))
    states = sp.sample(rng, 300)
    idx = NeighborIndex(sp, states, 3.0)
    for v in range(0, 300, 7):
        back, _ = idx.near_backward(v)
        for u in back:
            fwd, _ = idx.near_forward(int(u))
            if v not in fwd:
                raise AssertionError("near duality violated")


def _verify_oracle_agreement():
    from fmtree.index import compute_radius, sample_states
    from fmtree.oracle import dijkstra_disk_graph, fmt_star
    from fmtree.planner import DynamicFMT
    from fmtree.spaces import SpaceParams, make_space

    sp = make_space("euclid2d", SpaceParams(bounds=((-50, 50), (-50, 50))))
    for seed in range(5):
        rng = np.random.default_rng(seed)
        start, goal = rng.uniform(-45, 45, (2, 2))
        samples = sample_states(sp, 200, seed, start, goal)
        r = compute_radius(samples.count, 2, 1.8, 1e4)
        planner = DynamicFMT(sp, samples, r)
        planner.expand(samples.start_id)
        a = fmt_star(sp, samples, r, None, samples.start_id, index=planner.index)
        b = dijkstra_disk_graph(sp, samples, r, None, samples.start_id,
                                index=planner.index)
        for name, got in (("fmt*", a.robot_cost), ("dijkstra", b.robot_cost)):
            if abs(planner.costs[samples.start_id] - got) > 1e-9:
                raise AssertionError(f"planner diverges from {name}")


def _verify_repair_dominance():
    from fmtree.index import compute_radius, sample_states
    from fmtree.oracle import fmt_star
    from fmtree.planner import DynamicFMT
    from fmtree.spaces import SpaceParams, make_space
    from fmtree.world import ObstaclePrediction

    sp = make_space("euclid2d", SpaceParams(bounds=((-50, 50), (-50, 50))))
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        start, goal = rng.uniform(-45, 45, (2, 2))
        samples = sample_states(sp, 300, seed, start, goal)
        r = compute_radius(samples.count, 2, 1.8, 1e4)
        planner = DynamicFMT(sp, samples, r)
        planner.expand(samples.start_id)
        live = []
        for i in range(6):
            if live and rng.random() < 0.4:
                planner.remove_obstacles([live.pop(rng.integers(len(live)))])
            else:
                p = ObstaclePrediction(i, float(rng.uniform(2, 6)),
                                       p0=tuple(rng.uniform(-40, 40, 2)),
                                       v=(0.0, 0.0), t0=0.0)
                live.append(p)
                planner.add_obstacles([p])
            planner.expand(samples.start_id)
        oracle = fmt_star(sp, samples, r, live, samples.start_id,
                          index=planner.index)
        mine = planner.costs[samples.start_id]
        if mine > oracle.robot_cost + 1e-9:
            raise AssertionError("repaired cost worse than from-scratch baseline")


def _verify_world_roundtrip():
    from fmtree.world import ObstacleSpec, World, diff

    w = World([ObstacleSpec(i, radius=1.0 + i,
                            waypoints=((0.0, float(i)), (10.0, float(i))),
                            speed=2.0) for i in range(5)], timed=True)
    a, b = w.observe(1.0), w.observe(4.0)
    d = diff(a, b)
    rebuilt = (set(a.by_key()) - {p.key for p in d.removed}) | {p.key for p in d.added}
    if rebuilt != set(b.by_key()):
        raise AssertionError("diff does not reconstruct the new snapshot")
    if not diff(b, b).empty:
        raise AssertionError("diff of identical snapshots not empty")


_VERIFY_SUITES = [
    ("steering-reproducible-and-bounded", _verify_steering),
    ("near-queries-dual", _verify_near_duality),
    ("planner-matches-oracles-obstacle-free", _verify_oracle_agreement),
    ("repair-never-worse-than-rebuild", _verify_repair_dominance),
    ("world-diff-roundtrip", _verify_world_roundtrip),
]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fmtree",
                                 description="dynamic replanning benchmark harness")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", help="scenario JSON file")
        p.add_argument("--preset", help="built-in preset (or grid) name")
        p.add_argument("--samples", type=int, help="override sample count")
        p.add_argument("--c-mult", dest="c_mult", type=float,
                       help="override radius multiplier")
        p.add_argument("--seed", type=int, help="override scenario seed")
        p.add_argument("--trials", type=int, help="override trial count")
        p.add_argument("--out", default="out", help="output directory")

    p_plan = sub.add_parser("plan", help="run a single trial, emit a trace")
    common(p_plan)
    p_plan.add_argument("--clock", choices=("wall", "fixed"), default="wall",
                        help="fixed makes traces byte-reproducible")
    p_plan.set_defaults(fn=cmd_plan)

    p_bench = sub.add_parser("bench", help="run a condition grid, emit summary")
    common(p_bench)
    p_bench.add_argument("--workers", type=int, default=1,
                         help="parallel trial workers")
    p_bench.add_argument("--traces", action="store_true",
                         help="also write per-condition traces")
    p_bench.set_defaults(fn=cmd_bench)

    p_verify = sub.add_parser("verify", help="run the oracle property suites")
    p_verify.set_defaults(fn=cmd_verify)
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit:
        raise
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
