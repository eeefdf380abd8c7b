import math

import numpy as np
import pytest

from fmtree.index import SampleSet, compute_radius, sample_states
from fmtree.oracle import dijkstra_disk_graph, fmt_star
from fmtree.planner import DynamicFMT, RepairMetrics
from fmtree.spaces import SpaceParams, make_space
from fmtree.world import ObstaclePrediction, ObstacleSpec, Snapshot, World, collision_free, diff

from test_spaces import euclid_space, holo_space


def pred(pid, center, r_eff):
    return ObstaclePrediction(obstacle_id=pid, effective_radius=r_eff,
                              p0=(float(center[0]), float(center[1])),
                              v=(0.0, 0.0), t0=0.0)


def euclid_planner(states, radius, start_id=None, goal_id=None, world=None):
    states = np.asarray(states, dtype=float)
    span = max(60.0, float(np.abs(states).max()) + 1)
    sp = euclid_space(span=span)
    n = len(states)
    samples = SampleSet(states=states, seed=0,
                        start_id=n - 2 if start_id is None else start_id,
                        goal_id=n - 1 if goal_id is None else goal_id)
    return DynamicFMT(sp, samples, radius, world=world)


def random_euclid_planner(n, seed, radius=None, world=None):
    sp = euclid_space(span=50.0)
    rng = np.random.default_rng(seed)
    start, goal = rng.uniform(-45, 45, (2, 2))
    samples = sample_states(sp, n, seed, start, goal)
    r = radius or compute_radius(samples.count, 2, 1.8, 100.0 * 100.0)
    return DynamicFMT(sp, samples, r, world=world), samples


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def test_initial_state():
    planner, samples = random_euclid_planner(50, 1)
    assert planner.open.members() == [samples.goal_id]
    assert planner.costs[samples.goal_id] == 0.0
    others = [i for i in range(samples.count) if i != samples.goal_id]
    assert np.all(np.isinf(planner.costs[others]))
    assert np.all(planner.parent == -1)


def test_init_deterministic():
    p1, _ = random_euclid_planner(80, 3)
    p2, _ = random_euclid_planner(80, 3)
    p1.expand()
    p2.expand()
    assert np.array_equal(p1.costs, p2.costs)
    assert np.array_equal(p1.parent, p2.parent)


# ---------------------------------------------------------------------------
# expansion vs exact oracle
# ---------------------------------------------------------------------------

def test_five_node_chain_matches_dijkstra():
    states = np.array([[0.0, 0], [1.0, 0], [2.0, 0], [3.0, 0], [0.0, 0.8]])
    planner = euclid_planner(states, radius=1.3, start_id=3, goal_id=0)
    planner.expand(3)
    samples = planner.samples
    oracle = dijkstra_disk_graph(planner.space, samples, 1.3, None, 3,
                                 index=planner.index)
    assert np.allclose(planner.costs, oracle.costs, atol=1e-9)
    assert planner.costs[3] == pytest.approx(3.0, abs=1e-9)


def test_obstacle_free_costs_match_dijkstra_random():
    for seed in range(5):
        planner, samples = random_euclid_planner(150, seed)
        planner.expand()  # drain fully so every node settles
        oracle = dijkstra_disk_graph(planner.space, samples, planner.radius,
                                     None, samples.start_id, index=planner.index)
        assert np.allclose(planner.costs, oracle.costs, atol=1e-9, equal_nan=True)


def test_expand_guard_skips_when_top_is_worse():
    states = np.array([[0.0, 0], [1.0, 0], [2.0, 0], [3.0, 0], [0.0, 0.8]])
    planner = euclid_planner(states, radius=1.3, start_id=3, goal_id=0)
    planner.expand(3)
    planner.metrics = RepairMetrics()
    # queue a node whose cost exceeds the robot's: guard must not run the body
    planner.costs[3] = 5.0
    planner._queue_insert(4, 7.0)
    planner.expand(3)
    assert planner.metrics.k == 0
    assert 4 in planner.open


def test_orphaned_robot_drains_queue():
    planner, samples = random_euclid_planner(100, 11)
    rid = samples.start_id
    planner.costs[rid] = np.inf
    planner.expand(rid)
    assert len(planner.open) == 0 or np.isfinite(planner.costs[rid])


def test_monotone_extraction_and_strict_improvement():
    planner, samples = random_euclid_planner(200, 5)
    popped = []
    last_cost = {}
    def on_extract(z, sel):
        popped.append(planner.costs[z])
    def on_connect(x):
        c = planner.costs[x]
        assert c < last_cost.get(x, np.inf)
        last_cost[x] = c
    planner.expand(on_extract=on_extract, on_connect=on_connect)
    assert all(a <= b + 1e-12 for a, b in zip(popped, popped[1:]))


# ---------------------------------------------------------------------------
# update_parent / get_descendants
# ---------------------------------------------------------------------------

def test_update_parent_semantics():
    planner, _ = random_euclid_planner(10, 0)
    planner.update_parent(3, 5)
    assert planner.parent[3] == 5 and 3 in planner.children[5]
    planner.update_parent(3, 5)  # no-op
    assert planner.parent[3] == 5
    planner.update_parent(3, 7)
    assert 3 not in planner.children[5] and 3 in planner.children[7]
    planner.update_parent(3, None)
    assert planner.parent[3] == -1 and 3 not in planner.children[7]


def test_descendants_examples():
    planner, _ = random_euclid_planner(10, 0)
    planner.update_parent(1, 0)
    planner.update_parent(2, 1)
    planner.update_parent(3, 2)
    assert planner.get_descendants([3]) == set()
    assert planner.get_descendants([1]) == {2, 3}
    assert planner.get_descendants([0, 2]) == {1, 3}


def test_descendants_match_reachability_matrix():
    rng = np.random.default_rng(12)
    planner, _ = random_euclid_planner(48, 0)
    n = planner.samples.count
    for i in range(1, n):
        planner.update_parent(i, int(rng.integers(0, i)))
    adj = np.zeros((n, n), dtype=bool)
    for c in range(n):
        if planner.parent[c] != -1:
            adj[planner.parent[c], c] = True
    closure = adj.copy()
    for _ in range(n):
        closure = closure | (closure @ adj)
    for _ in range(20):
        seeds = set(int(v) for v in rng.integers(0, n, size=3))
        expected = set()
        for s in seeds:
            expected |= set(np.flatnonzero(closure[s]).tolist())
        assert planner.get_descendants(seeds) == expected - seeds


# ---------------------------------------------------------------------------
# obstacle repair
# ---------------------------------------------------------------------------

def corridor_planner():
    """Line of nodes goal(0,0) ... (8,0) with a branch; radius 1.3."""
    states = np.array([[float(i), 0.0] for i in range(9)]
                      + [[4.0, 1.0], [4.0, 2.0]])
    return euclid_planner(states, radius=1.3, start_id=8, goal_id=0)


def test_add_obstacle_blocking_nothing_is_noop():
    planner = corridor_planner()
    planner.expand(8)
    costs = planner.costs.copy()
    planner.metrics = RepairMetrics()
    planner.add_obstacles([pred(0, (4.0, -3.0), 0.5)])
    assert np.array_equal(costs, planner.costs)
    assert planner.metrics.n_aff == 0 and planner.metrics.n_c == 0


def test_add_obstacle_prunes_subtree():
    planner = corridor_planner()
    planner.expand(8)
    # cut edge (4,0)-(3,0); descendants of node 4 include 5..8 and the branch
    planner.metrics = RepairMetrics()
    planner.add_obstacles([pred(0, (3.5, 0.0), 0.3)])
    orphans = {4, 5, 6, 7, 8, 9, 10}
    assert np.all(np.isinf(planner.costs[list(orphans)]))
    assert np.all(planner.parent[list(orphans)] == -1)
    assert planner.metrics.n_aff == len(orphans)
    for x in orphans:
        assert x not in planner.open
    planner.check_coherence()


def test_pruned_open_node_leaves_queue():
    planner = corridor_planner()
    planner.expand()  # drain; queue empty, all finite
    planner._queue_insert(5, float(planner.costs[5]))
    planner.add_obstacles([pred(0, (4.5, 0.0), 0.3)])
    assert 5 not in planner.open
    assert np.isinf(planner.costs[5])


def test_remove_still_covered_edge_not_freed():
    planner = corridor_planner()
    planner.expand(8)
    a = pred(0, (3.5, 0.0), 0.3)
    b = pred(1, (3.5, 0.2), 0.6)
    planner.add_obstacles([a, b])
    planner.metrics = RepairMetrics()
    planner.remove_obstacles([a])   # edge still blocked by b
    planner.expand(8)
    assert np.isinf(planner.costs[8])
    planner.remove_obstacles([b])
    planner.expand(8)
    assert planner.costs[8] == pytest.approx(8.0, abs=1e-9)


def test_remove_lone_obstacle_requeues_endpoints():
    planner = corridor_planner()
    planner.expand()
    ob = pred(0, (4.5, 0.0), 0.3)
    planner.add_obstacles([ob])
    planner.metrics = RepairMetrics()
    planner.remove_obstacles([ob])
    assert planner.metrics.n_c > 0
    planner.expand(8)
    assert planner.costs[8] == pytest.approx(8.0, abs=1e-9)
    planner.check_coherence()


def test_update_obstacles_order_add_then_remove():
    planner = corridor_planner()
    calls = []
    planner.add_obstacles = lambda preds: calls.append("add")
    planner.remove_obstacles = lambda preds: calls.append("remove")
    d = diff(Snapshot(0.0, (pred(0, (0, -5), 1.0),)),
             Snapshot(1.0, (pred(1, (0, 5), 1.0),)))
    planner.update_obstacles(d)
    assert calls == ["add", "remove"]
    calls.clear()
    planner.update_obstacles(diff(Snapshot(0.0, ()),
                                  Snapshot(1.0, (pred(2, (0, 9), 1.0),))))
    assert calls == ["add"]  # add-only diff takes only the add path


def test_update_obstacles_empty_diff_noop():
    planner = corridor_planner()
    planner.expand()
    costs = planner.costs.copy()
    planner.metrics = RepairMetrics()
    planner.update_obstacles(diff(None, Snapshot(0.0, ())))
    assert np.array_equal(costs, planner.costs)
    assert planner.metrics.n_aff == planner.metrics.n_c == 0


def test_queue_neighbors_guard():
    planner = corridor_planner()
    planner.expand()  # all finite, queue empty
    planner.costs[6] = np.inf   # simulate one orphan neighbor
    planner.update_parent(6, None)
    planner._queue_insert(3, float(planner.costs[3]))  # already open
    planner.metrics = RepairMetrics()
    planner.queue_neighbors([5])
    # neighbors of 5 are {4, 6(inf), 3(open... wait 3 is not a neighbor of 5}
    assert 4 in planner.open
    assert 6 not in planner.open
    assert planner.metrics.n_c > 0
    before = planner.metrics.n_c
    planner.queue_neighbors([5, 5])  # idempotent for already-open nodes
    assert planner.metrics.n_c == before
    planner.queue_neighbors([])
    assert planner.metrics.n_c == before


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------

def test_extract_path_robot_at_goal():
    planner, samples = random_euclid_planner(30, 2)
    path, cost = planner.extract_path(samples.goal_id)
    assert path == [samples.goal_id] and cost == 0.0


def test_extract_path_orphan_empty():
    planner, samples = random_euclid_planner(30, 2)
    path, cost = planner.extract_path(samples.start_id)
    assert path == [] and math.isinf(cost)


def test_path_telescoping_costs():
    planner, samples = random_euclid_planner(300, 7)
    planner.expand(samples.start_id)
    path, cost = planner.extract_path(samples.start_id)
    assert len(path) > 1
    assert cost == pytest.approx(planner.costs[samples.start_id])
    total = 0.0
    for child, parent in zip(path, path[1:]):
        edge = planner.space.steer(planner.states[child], planner.states[parent])
        hop = planner.costs[child] - planner.costs[parent]
        assert hop == pytest.approx(edge.cost, abs=1e-9)
        total += edge.cost
    assert total == pytest.approx(cost, abs=1e-9)


def test_repaired_path_is_collision_free():
    # trunk (0..8, 0) plus a parallel detour row above the blocked stretch
    states = np.array([[float(i), 0.0] for i in range(9)]
                      + [[float(i), 1.0] for i in range(2, 7)])
    planner = euclid_planner(states, radius=1.3, start_id=8, goal_id=0)
    planner.expand(8)
    ob = pred(0, (3.5, 0.0), 0.4)
    planner.add_obstacles([ob])
    planner.expand(8)
    path, cost = planner.extract_path(8)
    assert path, "detour through the upper row should exist"
    assert cost > 8.0
    for child, parent in zip(path, path[1:]):
        traj = planner.space.steer(planner.states[child], planner.states[parent])
        dense = traj.resample(0.01)
        assert collision_free(dense, [ob])
    planner.check_coherence()


# ---------------------------------------------------------------------------
# suboptimal-connection rewiring regression
# ---------------------------------------------------------------------------

def test_blocked_better_candidate_then_rewire():
    """A node first connects through a detour because its cheapest-looking
    parent is blocked and its true best parent got closed; releasing the
    blocked corridor must rewire it to the cheaper route."""
    pts = {
        "g": (0.0, 0.0), "u1": (1.9, 0.7), "u2": (2.1, -0.55), "x": (4.0, 0.0),
        "w1": (3.3, 2.4), "w": (4.9, 1.6), "p": (3.2, -1.9), "z": (4.3, -1.3),
    }
    names = list(pts)
    idx = {k: i for i, k in enumerate(names)}
    states = np.array([pts[k] for k in names])
    planner = euclid_planner(states, radius=2.35, start_id=idx["x"],
                             goal_id=idx["g"])
    o1 = pred(0, (3.05, -0.275), 0.2)   # blocks u2 -> x only
    o2 = pred(1, (3.2, -1.3), 0.6)      # suppresses the u2/p/z corridor

    def d(a, b):
        return math.dist(pts[a], pts[b])

    # the four preconditions of the failure mode
    assert d("g", "u2") + d("u2", "x") < d("g", "u1") + d("u1", "x")
    assert d("g", "u1") < d("g", "u2")
    blocked = planner.space.steer(states[idx["u2"]], states[idx["x"]])
    assert not collision_free(blocked, [o1])
    free = planner.space.steer(states[idx["u1"]], states[idx["x"]])
    assert collision_free(free, [o1, o2])

    planner.add_obstacles([o1, o2])
    planner.expand(idx["x"])
    detour = d("g", "u1") + d("u1", "w1") + d("w1", "w") + d("w", "x")
    assert planner.costs[idx["x"]] == pytest.approx(detour, abs=1e-9)
    assert planner.parent[idx["x"]] == idx["w"]

    planner.remove_obstacles([o2])
    planner.expand(idx["x"])
    rewired = d("g", "u2") + d("u2", "z") + d("z", "x")
    assert planner.costs[idx["x"]] == pytest.approx(rewired, abs=1e-9)
    assert planner.parent[idx["x"]] == idx["z"]
    assert rewired < detour


# ---------------------------------------------------------------------------
# plan_step integration
# ---------------------------------------------------------------------------

def test_plan_step_without_changes_has_zero_repair():
    sp = euclid_space(span=50.0)
    world = World([ObstacleSpec(0, radius=2.0, inflation=1.0,
                                waypoints=((20.0, 20.0),))], timed=False)
    samples = sample_states(sp, 200, 4, (-40, -40), (40, 40))
    planner = DynamicFMT(sp, samples, compute_radius(202, 2, 1.8, 1e4), world=world)
    robot = np.array([-40.0, -40.0])
    r1 = planner.plan_step(0.0, robot)
    assert np.isfinite(r1.c_robot)
    r2 = planner.plan_step(0.1, robot)
    assert r2.metrics.n_aff == 0 and r2.metrics.n_c == 0
    # the snap rule may land on a cheaper nearby node, never a worse one
    assert r2.c_robot <= r1.c_robot + 1e-9


def test_plan_step_repairs_moving_obstacle():
    sp = euclid_space(span=50.0)
    world = World([ObstacleSpec(0, radius=2.0, inflation=2.0,
                                waypoints=((0.0, -15.0), (0.0, 15.0)), speed=5.0)],
                  timed=False)
    samples = sample_states(sp, 600, 8, (-40.0, 0.0), (40.0, 0.0))
    planner = DynamicFMT(sp, samples, compute_radius(602, 2, 1.8, 1e4), world=world)
    robot = np.array([-40.0, 0.0])
    saw_repair = False
    for i in range(25):
        t = 0.1 * i
        res = planner.plan_step(t, robot)
        if res.metrics.n_aff > 0:
            saw_repair = True
        if res.path_ids:
            preds = planner.obstacles.values()
            for child, parent in zip(res.path_ids, res.path_ids[1:]):
                traj = planner.space.steer(planner.states[child],
                                           planner.states[parent])
                assert collision_free(traj.resample(0.01), preds)
    assert saw_repair
    planner.check_coherence()
