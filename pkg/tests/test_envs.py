from __future__ import annotations

import dataclasses
import itertools

import numpy as np
import pytest

from mtp.envs import (
    ENVIRONMENTS,
    DomainRandomizer,
    DoubleIntegratorEnv,
    Layout,
    NavigationEnv,
    PendulumEnv,
    Perturbation,
    load_layout,
    make_env,
    randomize_models,
    sweep_clamp,
    wrap_angle,
)
from mtp.planner import MTPPlanner, PlannerConfig, plan_step
from mtp.rollout import batch_rollout

from oracles import double_integrator_dp_cost, nav_step_substep

# ---------------------------------------------------------------- navigation


@pytest.fixture(scope="module")
def nav():
    return NavigationEnv()


def test_free_space_step():
    env = NavigationEnv(gain=1.0, layout=Layout(rectangles=[[1.0, 1.0, 1.2, 1.2]], start=[0, 0], goal=[-1, -1]))
    np.testing.assert_allclose(env.step(np.zeros(2), np.array([1.0, 0.0])), [0.05, 0.0])


def test_cost_at_goal_is_wall_term_only(nav):
    g = nav.layout.goal
    expected = nav.wall_weight * np.exp(-nav.wall_decay * nav.wall_distance(g))
    assert nav.running_cost(g, np.zeros(2)) == pytest.approx(expected, rel=1e-15)


def test_goal_inside_wall_rejected():
    with pytest.raises(ValueError):
        NavigationEnv(layout=Layout(rectangles=[[-0.2, -0.2, 0.2, 0.2]], start=[1, 1], goal=[0, 0]))


def test_clamp_matches_substep_oracle(nav):
    rng = np.random.default_rng(0)
    boxes = nav.inflated_walls
    x = rng.uniform(-1.0, 1.0, size=(300, 2))
    free = np.array([nav.signed_clearance(p, boxes) > 0 for p in x])
    x = x[free][:150]
    delta = rng.uniform(-0.4, 0.4, size=x.shape)
    ours = sweep_clamp(x, delta, boxes)
    for p, d, got in zip(x, delta, ours):
        ref = nav_step_substep(tuple(p), tuple(d), boxes.tolist())
        assert np.linalg.norm(got - np.array(ref)) <= np.linalg.norm(d) / 4000 + 1e-9


def test_clamp_never_enters_obstacles(nav):
    rng = np.random.default_rng(1)
    x = np.tile(nav.initial_state(), (5000, 1))
    for _ in range(30):
        x = nav.step(x, rng.uniform(-1, 1, x.shape))
        lo, hi = nav.inflated_walls[:, :2], nav.inflated_walls[:, 2:]
        inside = np.all((x[:, None] > lo + 1e-9) & (x[:, None] < hi - 1e-9), axis=-1)
        assert not inside.any()


def test_wall_distance_matches_grid_search(nav):
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1.9, 1.9, size=(40, 2))
    samples = []
    for x0, y0, x1, y1 in nav.walls:
        # rectangles are solid; clip the outer border slabs to the region of interest
        x0, y0, x1, y1 = max(x0, -2.2), max(y0, -2.2), min(x1, 2.2), min(y1, 2.2)
        xs = np.arange(x0, x1 + 1e-3, 1e-3)
        ys = np.arange(y0, y1 + 1e-3, 1e-3)
        samples += [np.stack([xs, np.full_like(xs, y0)], 1), np.stack([xs, np.full_like(xs, y1)], 1)]
        samples += [np.stack([np.full_like(ys, x0), ys], 1), np.stack([np.full_like(ys, x1), ys], 1)]
    boundary = np.concatenate(samples)
    for p in pts:
        brute = np.min(np.linalg.norm(boundary - p, axis=1))
        inside = any(b[0] <= p[0] <= b[2] and b[1] <= p[1] <= b[3] for b in nav.walls)
        assert abs(nav.wall_distance(p) - (0.0 if inside else brute)) < 2e-3


def test_layout_round_trip(tmp_path):
    layout = load_layout()
    path = tmp_path / "layout.json"
    import json

    path.write_text(json.dumps(layout.to_dict()))
    again = load_layout(path)
    np.testing.assert_array_equal(again.rectangles, layout.rectangles)
    bad = layout.to_dict() | {"schema": "mtp-layout/0"}
    path.write_text(json.dumps(bad))
    with pytest.raises(ValueError):
        load_layout(path)


# ---------------------------------------------------------------- double integrator


def test_double_integrator_coasts():
    env = DoubleIntegratorEnv()
    x = np.array([0.0, 0.0, 0.5, -0.2])
    np.testing.assert_allclose(env.step(x, np.zeros(2)), [0.025, -0.01, 0.5, -0.2])
    rest = np.zeros(4)
    assert env.running_cost(rest, np.zeros(2)) == 0.0
    r = batch_rollout([env], rest, np.zeros((3, 20, 2)))
    np.testing.assert_array_equal(r.summed, 0.0)


def test_double_integrator_optimum_matches_riccati():
    optimize = pytest.importorskip("scipy.optimize")
    env = DoubleIntegratorEnv(goal=(0.0,), start=(-0.3,), terminal_weight=5.0, max_accel=10.0)
    T = 20
    x0 = env.initial_state()

    def cost(u):
        return batch_rollout([env], x0, u.reshape(1, T, 1)).summed[0]

    res = optimize.minimize(cost, np.zeros(T), method="BFGS", options={"gtol": 1e-10})
    assert np.all(np.abs(res.x) < env.max_accel)  # box inactive, so the unconstrained optimum applies
    ref = double_integrator_dp_cost(
        x0, T, env.dt, (env.position_weight, env.velocity_weight), env.control_weight, env.terminal_weight
    )
    assert res.fun == pytest.approx(ref, rel=1e-6)


# ---------------------------------------------------------------- pendulum


def test_pendulum_costs():
    env = PendulumEnv()
    assert env.running_cost(np.array([np.pi, 0.0]), np.zeros(1)) == 0.0
    assert env.running_cost(np.zeros(2), np.zeros(1)) == pytest.approx(env.angle_weight * np.pi**2)
    assert wrap_angle(np.array(np.pi)) == pytest.approx(-np.pi)


def test_pendulum_rejects_strong_motor():
    with pytest.raises(ValueError):
        PendulumEnv(max_torque=20.0)


@pytest.fixture(scope="module")
def bang_bang_oracle():
    env = PendulumEnv(dt=0.25)
    seqs = np.array(list(itertools.product([-1.0, 0.0, 1.0], repeat=12))) * env.max_torque
    r = batch_rollout([env], env.initial_state(), seqs[:, :, None])
    b = int(np.argmin(r.summed))
    return env, float(r.summed[b]), r.states[0, b, -1]


def test_bang_bang_search_swings_up(bang_bang_oracle):
    env, _, final = bang_bang_oracle
    assert abs(env.angle_error(final)) < 0.2


def test_planner_matches_bang_bang_oracle(bang_bang_oracle):
    env, oracle_cost, _ = bang_bang_oracle
    cfg = PlannerConfig(M=6, N=30, B=256, T=12, beta=0.5, elites=8, sigma_init=5.0, sigma_min=0.5, interpolation="linear")
    best = np.inf
    for seed in range(5):  # multi-start
        dist = MTPPlanner(cfg).initial_distribution(env.limits)
        rng = np.random.default_rng(seed)
        for _ in range(100):
            _, dist, diag = plan_step(env.initial_state(), dist, cfg, [env], rng)
            best = min(best, diag.best_cost)
    assert best <= oracle_cost


# ---------------------------------------------------------------- randomization


def test_zero_width_randomization_reproduces_base():
    base = PendulumEnv()
    rz = DomainRandomizer(base, {"mass": Perturbation("relative", 0.0, 0.0)}, count=3)
    assert randomize_models(rz, np.random.default_rng(0)) == [base] * 3
    assert randomize_models(DomainRandomizer(base, {}, 2), np.random.default_rng(0)) == [base, base]


def test_mass_perturbation_support():
    base = PendulumEnv(max_torque=1.0)
    rz = DomainRandomizer(base, {"mass": Perturbation("relative", -0.1, 0.1)}, count=10_000)
    masses = np.array([m.mass for m in randomize_models(rz, np.random.default_rng(1))])
    assert masses.min() >= 0.9 and masses.max() <= 1.1
    assert len(set(masses.tolist())) > 9000


def test_randomization_is_deterministic():
    rz = DomainRandomizer(NavigationEnv(), {"gain": Perturbation("relative", -0.2, 0.2)}, count=4)
    a = randomize_models(rz, np.random.default_rng(5))
    b = randomize_models(rz, np.random.default_rng(5))
    assert [m.gain for m in a] == [m.gain for m in b]


def test_non_physical_draws_are_rejected():
    rz = DomainRandomizer(PendulumEnv(), {"mass": Perturbation("uniform", -5.0, -2.0)}, count=1)
    with pytest.raises(ValueError):
        randomize_models(rz, np.random.default_rng(0))
    with pytest.raises(ValueError):
        DomainRandomizer(PendulumEnv(), {"nonexistent": Perturbation("uniform", 0, 1)})


def test_registry_builds_every_env():
    for name in ENVIRONMENTS:
        env = make_env(name)
        x = env.initial_state()
        u = np.zeros(env.control_dim)
        assert np.all(np.isfinite(env.step(x, u)))
        assert env.running_cost(x, u) >= 0
    assert dataclasses.is_dataclass(make_env("pendulum", dt=0.1))
