from __future__ import annotations

import warnings

import numpy as np
import pytest

from mtp.baselines import mppi_step, ps_step
from mtp.core import Box
from mtp.envs import DoubleIntegratorEnv, ZeroCostEnv
from mtp.planner import (
    DegenerateUpdateWarning,
    GaussianControlDistribution,
    MTPPlanner,
    PlannerConfig,
    evaluate_candidates,
    mix_samples,
    plan_step,
    softmax_elite_update,
    softmax_weights,
)

from oracles import softmax_scalar

BOX = Box.symmetric(1.0, 2)


def _dist(T=6, n=2, std=0.5, seed=0):
    rng = np.random.default_rng(seed)
    return GaussianControlDistribution(rng.uniform(-0.5, 0.5, (T, n)), np.full((T, n), std))


# ---------------------------------------------------------------- softmax


def test_two_elite_analytic_weights():
    lam = 0.3
    w = softmax_weights(np.array([0.0, lam * np.log(2.0)]), lam)
    np.testing.assert_allclose(w, [2 / 3, 1 / 3], atol=1e-12)


def test_softmax_matches_scalar_oracle():
    rng = np.random.default_rng(1)
    for _ in range(50):
        c = rng.exponential(3.0, size=9)
        np.testing.assert_allclose(softmax_weights(c, 0.7), softmax_scalar(list(c), 0.7), atol=1e-14)


def test_softmax_simplex_under_extreme_costs():
    rng = np.random.default_rng(2)
    for _ in range(10_000):
        scale = 10.0 ** rng.integers(-3, 301)
        c = rng.uniform(0, 1, size=8) * scale
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            w = softmax_weights(c, 0.1)
        assert np.all(w >= 0) and abs(w.sum() - 1.0) < 1e-12


def test_small_temperature_concentrates_on_argmin():
    w = softmax_weights(np.array([0.3, 0.1, 0.2]), 1e-12)
    assert w[1] >= 1 - 1e-6


# ---------------------------------------------------------------- elite update


def test_single_elite_copies_best_candidate():
    rng = np.random.default_rng(3)
    U = rng.uniform(-1, 1, (10, 6, 2))
    s = rng.uniform(size=10)
    res = softmax_elite_update(U, s, PlannerConfig(B=10, elites=1, T=6), _dist())
    np.testing.assert_array_equal(res.new_mean, U[np.argmin(s)])
    np.testing.assert_array_equal(res.best_control, U[np.argmin(s), 0])


def test_equal_costs_give_uniform_weights():
    rng = np.random.default_rng(4)
    U = rng.uniform(-1, 1, (8, 6, 2))
    res = softmax_elite_update(U, np.ones(8), PlannerConfig(B=8, elites=4, T=6), _dist())
    np.testing.assert_allclose(res.weights, 0.25)
    np.testing.assert_allclose(res.new_mean, U[:4].mean(axis=0), atol=1e-15)


def test_ties_break_toward_lower_index():
    U = np.arange(5, dtype=float)[:, None, None] * np.ones((5, 2, 1))
    res = softmax_elite_update(U, np.array([1.0, 0.0, 0.0, 2.0, 0.0]), PlannerConfig(B=5, elites=2, T=2), _dist(2, 1))
    np.testing.assert_array_equal(res.elite_indices, [1, 2])
    assert res.best_index == 1


def test_std_floor_and_smoothing():
    U = np.zeros((4, 6, 2))
    dist = _dist(std=0.8)
    cfg = PlannerConfig(B=4, elites=2, T=6, sigma_min=0.05, smoothing=0.25)
    res = softmax_elite_update(U, np.arange(4.0), cfg, dist)
    np.testing.assert_allclose(res.new_std, 0.05 + 0.25 * (0.8 - 0.05))
    np.testing.assert_allclose(res.new_mean, 0.25 * dist.mean)
    res0 = softmax_elite_update(U, np.arange(4.0), PlannerConfig(B=4, elites=2, T=6), dist)
    assert np.all(res0.new_std >= 0.05)


def test_all_infinite_costs_keep_distribution():
    dist = _dist()
    U = np.zeros((4, 6, 2))
    with pytest.warns(DegenerateUpdateWarning):
        res = softmax_elite_update(U, np.full(4, np.inf), PlannerConfig(B=4, elites=2, T=6), dist)
    assert res.degenerate
    np.testing.assert_array_equal(res.new_mean, dist.mean)
    np.testing.assert_array_equal(res.new_std, dist.std)


# ---------------------------------------------------------------- mixing


@pytest.mark.parametrize("beta,expected_local", [(0.0, 15), (0.5, 7), (1.0, 0)])
def test_mix_row_counts(beta, expected_local):
    cfg = PlannerConfig(B=16, beta=beta, T=6, elites=4)
    P = cfg.tensor_count
    assert P + expected_local + 1 == 16
    U_tensor = np.full((P, 6, 2), 0.9)
    dist = _dist()
    U = mix_samples(U_tensor, dist, 16, BOX, np.random.default_rng(0))
    assert U.shape == (16, 6, 2)
    np.testing.assert_array_equal(U[expected_local:-1], U_tensor)
    np.testing.assert_array_equal(U[-1], dist.mean)


def test_tiny_sigma_local_rows_equal_mean():
    dist = GaussianControlDistribution(np.full((6, 2), 0.2), np.full((6, 2), 1e-9))
    U = mix_samples(np.empty((0, 6, 2)), dist, 8, BOX, np.random.default_rng(0))
    np.testing.assert_allclose(U, 0.2, atol=1e-6)


def test_mix_rejects_overfull_tensor_block():
    with pytest.raises(ValueError):
        mix_samples(np.zeros((8, 6, 2)), _dist(), 8, BOX, np.random.default_rng(0))


def test_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(B=8, elites=9)
    with pytest.raises(ValueError):
        PlannerConfig(beta=1.5)
    with pytest.raises(ValueError):
        PlannerConfig(temperature=0.0)
    assert PlannerConfig(B=8, beta=1.0).tensor_count == 7


# ---------------------------------------------------------------- evaluation


def test_zero_cost_env_scores_zero():
    env = ZeroCostEnv()
    U = np.random.default_rng(0).uniform(-1, 1, (5, 4, env.control_dim))
    s, S = evaluate_candidates(U, [env], env.initial_state())
    np.testing.assert_array_equal(s, 0.0)
    assert S.shape == (5, 4)


def test_identical_models_match_single_model():
    env = DoubleIntegratorEnv()
    U = np.random.default_rng(1).uniform(-1, 1, (7, 5, 2))
    s1, _ = evaluate_candidates(U, [env], env.initial_state())
    s3, _ = evaluate_candidates(U, [env, env, env], env.initial_state())
    np.testing.assert_array_equal(s1, s3)


# ---------------------------------------------------------------- plan_step


def test_plan_step_is_deterministic_and_emits_best_row():
    env = DoubleIntegratorEnv()
    cfg = PlannerConfig(M=4, N=6, B=32, T=10, elites=4)
    dist = MTPPlanner(cfg).initial_distribution(env.limits)
    a = plan_step(env.initial_state(), dist, cfg, [env], np.random.default_rng(7))
    b = plan_step(env.initial_state(), dist, cfg, [env], np.random.default_rng(7))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1].mean, b[1].mean)
    assert np.all(a[1].std >= cfg.sigma_min)
    assert env.limits.contains(a[1].mean)
    assert a[2].costs.shape == (32,)
    assert 0.0 <= a[2].entropy <= np.log(32)


def _random_dist(rng, T, n):
    return GaussianControlDistribution(rng.uniform(-0.8, 0.8, (T, n)), rng.uniform(0.1, 1.0, (T, n)))


def test_corner_equals_predictive_sampling():
    env = DoubleIntegratorEnv()
    cfg = PlannerConfig(B=24, T=8, beta=0.0, elites=1, smoothing=0.0)
    rng = np.random.default_rng(11)
    for k in range(50):
        dist = _random_dist(rng, 8, 2)
        x0 = rng.uniform(-1, 1, 4)
        _, mtp, _ = plan_step(x0, dist, cfg, [env], np.random.default_rng(k))
        _, ps, _ = ps_step(x0, dist, [env], np.random.default_rng(k), 24)
        np.testing.assert_array_equal(mtp.mean, ps.mean)


def test_corner_equals_mppi():
    env = DoubleIntegratorEnv()
    cfg = PlannerConfig(B=24, T=8, beta=0.0, elites=24, smoothing=0.0, temperature=0.5, fixed_std=True)
    rng = np.random.default_rng(12)
    for k in range(50):
        dist = _random_dist(rng, 8, 2)
        x0 = rng.uniform(-1, 1, 4)
        _, mtp, _ = plan_step(x0, dist, cfg, [env], np.random.default_rng(k))
        _, mppi, _ = mppi_step(x0, dist, 0.5, [env], np.random.default_rng(k), 24)
        np.testing.assert_array_equal(mtp.mean, mppi.mean)
        np.testing.assert_array_equal(mtp.std, mppi.std)


def test_shift_repeats_last_row():
    dist = GaussianControlDistribution(np.arange(4.0)[:, None], np.ones((4, 1)))
    np.testing.assert_array_equal(dist.shifted(1).mean[:, 0], [1, 2, 3, 3])
    np.testing.assert_array_equal(dist.shifted(10).mean[:, 0], [3, 3, 3, 3])
