from __future__ import annotations

import numpy as np
import pytest

from mtp.csvio import read_csv
from mtp.envs import DoubleIntegratorEnv, PendulumEnv
from mtp.rollout import batch_rollout, cumulative_cost, dump_trajectories


def _loop_rollout(model, x0, u_seq):
    """One trajectory, one model, scalar Python loop."""
    x = np.array(x0, dtype=float)
    total = 0.0
    for u in u_seq:
        total += float(model.running_cost(x, u))
        x = model.step(x, u)
    return total + float(model.terminal_cost(x))


def _models(R):
    return [PendulumEnv(mass=1.0 + 0.05 * r, damping=0.1 + 0.02 * r) for r in range(R)]


def test_batch_equals_loop_bitwise():
    models = _models(3)
    rng = np.random.default_rng(0)
    U = rng.uniform(-5, 5, (64, 20, 1))
    x0 = np.array([0.3, -0.1])
    res = batch_rollout(models, x0, U)
    assert res.states.shape == (3, 64, 21, 2) and res.per_step_costs.shape == (3, 64, 20)
    for r, m in enumerate(models):
        for b in range(64):
            single = batch_rollout([m], x0, U[b : b + 1])
            np.testing.assert_array_equal(single.per_step_costs[0, 0], res.per_step_costs[r, b])
    np.testing.assert_array_equal(res.states[:, :, 0], np.broadcast_to(x0, (3, 64, 2)))


def test_summed_matches_naive_loop():
    models = _models(3)
    U = np.random.default_rng(1).uniform(-5, 5, (8, 20, 1))
    x0 = np.array([0.0, 0.0])
    res = batch_rollout(models, x0, U)
    ref = [np.mean([_loop_rollout(m, x0, U[b]) for m in models]) for b in range(8)]
    np.testing.assert_allclose(res.summed, ref, rtol=1e-12)


def test_single_step_base_case():
    env = PendulumEnv()
    x0, u = np.array([0.2, 0.1]), np.array([[[1.5]]])
    expected = env.running_cost(x0, u[0, 0]) + env.terminal_cost(env.step(x0, u[0, 0]))
    assert batch_rollout([env], x0, u).summed[0] == expected


def test_cumulative_cost_arithmetic():
    np.testing.assert_array_equal(cumulative_cost(np.zeros((2, 3, 4))), 0.0)
    per = np.stack([np.ones((1, 1)), 3 * np.ones((1, 1))])
    assert cumulative_cost(per)[0] == 2.0
    rng = np.random.default_rng(2)
    S = rng.exponential(size=(3, 5, 7))
    naive = [sum(sum(S[r, b, t] for t in range(7)) for r in range(3)) / 3 for b in range(5)]
    np.testing.assert_allclose(cumulative_cost(S), naive, rtol=1e-12)
    np.testing.assert_allclose(cumulative_cost(4.0 * S), 4.0 * cumulative_cost(S), rtol=1e-12)
    S[1, 2, 3] = np.inf
    assert np.isinf(cumulative_cost(S)[2]) and np.all(np.isfinite(np.delete(cumulative_cost(S), 2)))


def test_divergence_scores_infinity():
    class Exploding(DoubleIntegratorEnv):
        def step(self, x, u):
            out = super().step(x, u)
            return np.where(np.asarray(u)[..., :1] > 0.5, np.nan, out)

    env = Exploding()
    U = np.zeros((2, 5, 2))
    U[1, 2, 0] = 0.9
    res = batch_rollout([env], env.initial_state(), U)
    assert np.isfinite(res.summed[0]) and np.isinf(res.summed[1])
    assert np.all(np.isfinite(res.states))
    assert np.all(np.isinf(res.per_step_costs[0, 1, 2:]))


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        batch_rollout([PendulumEnv()], np.zeros(2), np.zeros((1, 3, 2)))
    with pytest.raises(ValueError):
        batch_rollout([], np.zeros(2), np.zeros((1, 3, 1)))


def test_trajectory_dump(tmp_path):
    env = PendulumEnv()
    U = np.ones((2, 3, 1))
    res = batch_rollout([env], env.initial_state(), U)
    path = dump_trajectories(tmp_path / "traj.csv", res, U)
    kind, rows = read_csv(path, "trajectories")
    assert len(rows) == 6
    assert float(rows[-1]["cost"]) == res.per_step_costs[0, 1, 2]
