import math

import numpy as np
import pytest

from fmtree.spaces import (
    _DUBINS_WORDS,
    ConfigurationError,
    SpaceParams,
    _dubins_candidates,
    _dubins_pose_at,
    dubins_lengths,
    dubins_shortest,
    interpolate,
    make_space,
    mod2pi,
)


def euclid_space(span=50.0):
    return make_space("euclid2d", SpaceParams(bounds=((-span, span), (-span, span))))


def holo_space(v_max=10.0, t_max=100.0):
    return make_space("holonomic_time", SpaceParams(
        bounds=((-50, 50), (-50, 50), (0, t_max)), v_max=v_max, t_max=t_max))


def dubins_space(v_min=1.0, v_max=20.0, rho=1.0, t_max=100.0):
    return make_space("dubins_time", SpaceParams(
        bounds=((-50, 50), (-50, 50), (0, 2 * math.pi), (0, t_max)),
        v_max=v_max, v_min=v_min, rho_min=rho, t_max=t_max))


def thruster_space(v_max=5.0, a_max=1.0, t_max=100.0):
    return make_space("thruster_time", SpaceParams(
        bounds=((-50, 50), (-50, 50), (-v_max, v_max), (-v_max, v_max), (0, t_max)),
        v_max=v_max, a_max=a_max, t_max=t_max))


ALL_SPACES = [euclid_space, holo_space, dubins_space, thruster_space]


def random_states(space, rng, n):
    return space.sample(rng, n)


# ---------------------------------------------------------------------------
# parameter validation
# ---------------------------------------------------------------------------

def test_params_reject_bad_bounds():
    with pytest.raises(ConfigurationError):
        SpaceParams(bounds=((0.0, 0.0),))
    with pytest.raises(ConfigurationError):
        SpaceParams(bounds=((0.0, math.inf),))
    with pytest.raises(ConfigurationError):
        SpaceParams(bounds=((0.0, 1.0),), v_min=2.0, v_max=1.0)
    with pytest.raises(ConfigurationError):
        SpaceParams(bounds=((0.0, 1.0),), rho_min=0.0)


def test_space_checks_coordinate_count():
    with pytest.raises(ConfigurationError):
        make_space("holonomic_time", SpaceParams(bounds=((0, 1), (0, 1))))
    with pytest.raises(ConfigurationError):
        make_space("nonsense", SpaceParams(bounds=((0, 1), (0, 1))))


def test_timed_space_requires_matching_horizon():
    with pytest.raises(ConfigurationError):
        make_space("holonomic_time", SpaceParams(
            bounds=((0, 1), (0, 1), (0, 30.0)), t_max=20.0))


# ---------------------------------------------------------------------------
# steering: holonomic examples
# ---------------------------------------------------------------------------

def test_holonomic_feasible_example():
    sp = holo_space(v_max=10.0)
    traj = sp.steer((0, 0, 0), (3, 4, 1))
    assert traj is not None
    assert traj.cost == pytest.approx(1.0, abs=1e-12)
    # straight segment at speed 5
    mid = traj._evaluate(np.array([0.5]))[0][0]
    assert np.allclose(mid, [1.5, 2.0, 0.5], atol=1e-9)


def test_holonomic_infeasible_speed():
    sp = holo_space(v_max=10.0)
    assert sp.steer((0, 0, 0), (3, 4, 0.4)) is None  # needs speed 12.5


def test_holonomic_backward_time_infeasible():
    sp = holo_space()
    assert sp.steer((0, 0, 1.0), (1, 0, 0.5)) is None


def test_zero_cost_self_connection():
    for make in ALL_SPACES:
        sp = make()
        s = sp.sample(np.random.default_rng(0), 1)[0]
        traj = sp.steer(s, s)
        assert traj is not None and traj.cost == 0.0


# ---------------------------------------------------------------------------
# steering: thruster bang-bang oracle
# ---------------------------------------------------------------------------

def _euler_two_piece(x0, v0, a1, a2, T, dt=1e-4):
    """Forward-Euler integration of a two-piece constant-acceleration profile."""
    x, v, t = x0, v0, 0.0
    while t < T - 1e-12:
        a = a1 if t < T / 2 else a2
        x += v * dt
        v += a * dt
        t += dt
    return x, v


def test_thruster_rest_to_rest_minimal_time():
    # closed form: moving d from rest to rest needs T >= 2*sqrt(d / a_max)
    sp = thruster_space(a_max=1.0)
    t_min = 2.0 * math.sqrt(1.0 / 1.0)
    assert sp.steer((0, 0, 0, 0, 0), (1, 0, 0, 0, t_min)) is not None
    assert sp.steer((0, 0, 0, 0, 0), (1, 0, 0, 0, t_min - 0.01)) is None


def test_thruster_profile_matches_euler_simulation():
    sp = thruster_space(a_max=1.0)
    traj = sp.steer((0, 0, 0, 0, 0), (1, 0, 0, 0, 2.0))
    assert traj is not None
    # independent oracle: integrate +a_max then -a_max
    x_end, v_end = _euler_two_piece(0.0, 0.0, 1.0, -1.0, 2.0)
    assert x_end == pytest.approx(1.0, abs=1e-3)
    assert v_end == pytest.approx(0.0, abs=1e-3)
    assert np.allclose(traj.end, [1, 0, 0, 0, 2.0], atol=1e-9)


def test_thruster_steer_hits_boundary_conditions():
    sp = thruster_space(v_max=5.0, a_max=2.0)
    rng = np.random.default_rng(3)
    hits = 0
    for _ in range(200):
        a, b = random_states(sp, rng, 2)
        traj = sp.steer(a, b)
        if traj is None:
            continue
        hits += 1
        assert np.allclose(traj.start, a, atol=1e-9)
        assert np.allclose(traj.end, b, atol=1e-9)
    assert hits > 10


# ---------------------------------------------------------------------------
# steering: dubins oracle
# ---------------------------------------------------------------------------

def test_dubins_degenerate_straight_line():
    sp = dubins_space(v_min=1.0, v_max=20.0, rho=1.0)
    length, word, _ = dubins_shortest((0, 0, 0), (10, 0, 0), 1.0)
    assert length == pytest.approx(10.0, abs=1e-9)
    traj = sp.steer((0, 0, 0, 0), (10, 0, 0, 1))
    assert traj is not None
    assert traj.cost == pytest.approx(1.0)
    assert traj.length == pytest.approx(10.0, abs=1e-9)


def test_dubins_speed_window():
    sp = dubins_space(v_min=1.0, v_max=20.0, rho=1.0)
    # length 10 in 20 s -> speed 0.5 below v_min
    assert sp.steer((0, 0, 0, 0), (10, 0, 0, 20.0)) is None
    # length 10 in 0.4 s -> speed 25 above v_max
    assert sp.steer((0, 0, 0, 0), (10, 0, 0, 0.4)) is None


def test_dubins_words_reconstruct_endpoint():
    # validity oracle: every finite-length word must land exactly on the goal pose
    rng = np.random.default_rng(7)
    rho = 2.0
    for _ in range(150):
        q0 = np.array([rng.uniform(-10, 10), rng.uniform(-10, 10),
                       rng.uniform(0, 2 * math.pi)])
        q1 = np.array([rng.uniform(-10, 10), rng.uniform(-10, 10),
                       rng.uniform(0, 2 * math.pi)])
        dx, dy = q1[0] - q0[0], q1[1] - q0[1]
        d = math.hypot(dx, dy) / rho
        theta = math.atan2(dy, dx)
        alpha, beta = mod2pi(q0[2] - theta), mod2pi(q1[2] - theta)
        cands = _dubins_candidates(alpha, beta, d)
        feasible = 0
        for word in _DUBINS_WORDS:
            t, p, q = (float(v) for v in cands[word])
            total = t + p + q
            if not math.isfinite(total):
                continue
            feasible += 1
            x, y, th = _dubins_pose_at(q0, rho, word, (t, p, q), np.array([total]))
            assert math.hypot(x[0] - q1[0], y[0] - q1[1]) < 1e-6, word
            dth = abs(mod2pi(th[0]) - mod2pi(q1[2]))
            assert min(dth, 2 * math.pi - dth) < 1e-6, word
        assert feasible >= 1


def test_dubins_length_not_below_euclidean():
    rng = np.random.default_rng(11)
    for _ in range(200):
        q0 = rng.uniform([-10, -10, 0], [10, 10, 2 * math.pi])
        q1 = rng.uniform([-10, -10, 0], [10, 10, 2 * math.pi])
        length, _, _ = dubins_shortest(q0, q1, 1.5)
        assert length >= math.hypot(q1[0] - q0[0], q1[1] - q0[1]) - 1e-9


def test_dubins_vectorized_matches_scalar():
    rng = np.random.default_rng(13)
    q0s = rng.uniform([-10, -10, 0], [10, 10, 2 * math.pi], size=(300, 3))
    q1 = np.array([1.0, -2.0, 0.7])
    vec = dubins_lengths(q0s, q1[None, :], 1.2)
    for i in range(len(q0s)):
        scal, _, _ = dubins_shortest(q0s[i], q1, 1.2)
        assert vec[i] == pytest.approx(scal, abs=1e-9)


# ---------------------------------------------------------------------------
# cost_estimate
# ---------------------------------------------------------------------------

def test_cost_estimate_euclid():
    sp = euclid_space()
    assert sp.cost_estimate((0, 0), (3, 4)) == pytest.approx(5.0)


def test_cost_estimate_backward_time_empty():
    sp = holo_space()
    assert sp.cost_estimate((0, 0, 1.0), (1, 0, 0.5)) is None


def test_estimate_lower_bounds_steer_cost():
    rng = np.random.default_rng(21)
    for make in (holo_space, dubins_space, thruster_space):
        sp = make()
        checked = 0
        for _ in range(1000):
            a, b = random_states(sp, rng, 2)
            traj = sp.steer(a, b)
            if traj is None:
                continue
            est = sp.cost_estimate(a, b)
            assert est is not None
            assert est <= traj.cost + 1e-9
            checked += 1
        assert checked > 20


# ---------------------------------------------------------------------------
# interpolate
# ---------------------------------------------------------------------------

def test_interpolate_straight_segment():
    sp = euclid_space()
    traj = sp.steer((0, 0), (10, 0))
    dense = interpolate(traj, 1.0)
    assert len(dense.states) == 11
    assert np.allclose(dense.states[0], [0, 0])
    assert np.allclose(dense.states[-1], [10, 0])


def test_interpolate_zero_length():
    sp = euclid_space()
    traj = sp.steer((1, 1), (1, 1))
    dense = interpolate(traj, 0.5)
    assert len(dense.states) == 1


def test_interpolate_respects_spacing():
    rng = np.random.default_rng(5)
    for make in ALL_SPACES:
        sp = make()
        for _ in range(50):
            a, b = random_states(sp, rng, 2)
            traj = sp.steer(a, b)
            if traj is None or traj.length < 1e-9:
                continue
            dense = interpolate(traj, 0.3)
            gaps = np.hypot(np.diff(dense.states[:, 0]), np.diff(dense.states[:, 1]))
            assert gaps.max() <= 0.3 * (1 + 1e-6)


def test_interpolate_dubins_samples_on_arc():
    sp = dubins_space(v_min=0.5, v_max=20.0, rho=1.0)
    # left semicircle of radius 1 centered at (0, 1): start (0,0,0) -> (0,2,pi)
    traj = sp.steer((0, 0, 0, 0), (0, 2, math.pi, 1.0))
    assert traj is not None
    assert traj.length == pytest.approx(math.pi, abs=1e-9)
    dense = interpolate(traj, 0.05)
    r = np.hypot(dense.states[:, 0] - 0.0, dense.states[:, 1] - 1.0)
    assert np.abs(r - 1.0).max() < 1e-6


# ---------------------------------------------------------------------------
# invariants & properties
# ---------------------------------------------------------------------------

def test_euclid_cost_symmetry_and_triangle():
    sp = euclid_space()
    rng = np.random.default_rng(17)
    pts = random_states(sp, rng, 100)
    for _ in range(100):
        i, j, k = rng.integers(0, 100, size=3)
        a, b, c = pts[i], pts[j], pts[k]
        assert sp.cost_estimate(a, b) == pytest.approx(sp.cost_estimate(b, a))
        assert (sp.cost_estimate(a, c)
                <= sp.cost_estimate(a, b) + sp.cost_estimate(b, c) + 1e-9)


def test_timed_spaces_reject_backward_time():
    rng = np.random.default_rng(19)
    for make in (holo_space, dubins_space, thruster_space):
        sp = make()
        for _ in range(100):
            a, b = random_states(sp, rng, 2)
            early, late = (a, b) if a[sp.time_coord] < b[sp.time_coord] else (b, a)
            assert sp.steer(late, early) is None


def test_steer_is_reproducible():
    rng = np.random.default_rng(23)
    for make in ALL_SPACES:
        sp = make()
        a, b = random_states(sp, rng, 2)
        t1, t2 = sp.steer(a, b), sp.steer(a, b)
        if t1 is None:
            assert t2 is None
            continue
        assert np.array_equal(t1.states, t2.states)
        assert np.array_equal(t1.times, t2.times)
        assert t1.cost == t2.cost


def test_batch_kernels_match_scalar_steer():
    rng = np.random.default_rng(29)
    for make in ALL_SPACES:
        sp = make()
        states = random_states(sp, rng, 120)
        target = random_states(sp, rng, 1)[0]
        mask, costs = sp.connect_costs(states, target)
        fmask, fcosts = sp.connect_costs_from(target, states)
        for i in range(len(states)):
            traj = sp.steer(states[i], target)
            assert mask[i] == (traj is not None)
            if traj is not None:
                assert costs[i] == pytest.approx(traj.cost, abs=1e-9)
            rtraj = sp.steer(target, states[i])
            assert fmask[i] == (rtraj is not None)
            if rtraj is not None:
                assert fcosts[i] == pytest.approx(rtraj.cost, abs=1e-9)


def test_max_spatial_step_bounds_displacement():
    rng = np.random.default_rng(31)
    for make in (holo_space, dubins_space, thruster_space):
        sp = make()
        for _ in range(300):
            a, b = random_states(sp, rng, 2)
            traj = sp.steer(a, b)
            if traj is None:
                continue
            sp_pts = traj.spatial()
            disp = np.hypot(sp_pts[:, 0] - sp_pts[0, 0],
                            sp_pts[:, 1] - sp_pts[0, 1]).max()
            assert disp <= sp.max_spatial_step(traj.cost) + 1e-6


def test_sampling_stays_in_bounds():
    for make in ALL_SPACES:
        sp = make()
        pts = sp.sample(np.random.default_rng(1), 500)
        assert all(sp.in_bounds(p) for p in pts)
