"""Batched rollouts of B control sequences through R model instances."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from mtp.core import FloatArray
from mtp.csvio import write_csv
from mtp.envs import EnvironmentModel


@dataclass(frozen=True)
class RolloutResult:
    states: FloatArray  # (R, B, T+1, d)
    per_step_costs: FloatArray  # (R, B, T); terminal cost folded into the last column
    summed: FloatArray  # (B,), mean over R of the per-trajectory sums


def cumulative_cost(per_step: FloatArray) -> FloatArray:
    """Sum over time in order t = 0..T-1, then average over models.

    A ``+inf`` entry makes that candidate's cost ``+inf``.
    """
    per_step = np.asarray(per_step, dtype=np.float64)
    totals = np.cumsum(per_step, axis=-1)[..., -1]  # strictly sequential in t
    return np.mean(totals, axis=0)


def _rollout_one(model: EnvironmentModel, x0: FloatArray, U: FloatArray) -> tuple[FloatArray, FloatArray]:
    B, T, _ = U.shape
    states = np.empty((B, T + 1, x0.shape[-1]))
    costs = np.empty((B, T))
    x = np.broadcast_to(x0, (B, x0.shape[-1])).copy()
    states[:, 0] = x
    dead = np.zeros(B, dtype=bool)
    with np.errstate(all="ignore"):
        for t in range(T):
            u = U[:, t]
            c = np.asarray(model.running_cost(x, u), dtype=np.float64)
            x_next = np.asarray(model.step(x, u), dtype=np.float64)
            dead |= ~np.isfinite(c) | ~np.all(np.isfinite(x_next), axis=-1)
            costs[:, t] = np.where(dead, np.inf, c)
            x = np.where(dead[:, None], x, x_next)
            states[:, t + 1] = x
        terminal = np.asarray(model.terminal_cost(x), dtype=np.float64)
        dead |= ~np.isfinite(terminal)
        costs[:, T - 1] = np.where(dead, np.inf, costs[:, T - 1] + terminal)
    return states, costs


def batch_rollout(models: Sequence[EnvironmentModel], x0: FloatArray, U: FloatArray) -> RolloutResult:
    """Roll every control sequence in ``U`` (B, T, n) through every model.

    Diverged trajectories (non-finite state or cost) hold their last finite
    state and score ``+inf`` from the divergence step onward.
    """
    if len(models) == 0:
        raise ValueError("need at least one model")
    U = np.asarray(U, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if U.ndim != 3:
        raise ValueError(f"controls must be (B, T, n), got shape {U.shape}")
    for model in models:
        if model.control_dim != U.shape[2] or model.state_dim != x0.shape[-1]:
            raise ValueError(
                f"{model.name} expects d={model.state_dim}, n={model.control_dim}; "
                f"got x0 {x0.shape} and controls {U.shape}"
            )
    runs = [_rollout_one(model, x0, U) for model in models]
    states = np.stack([s for s, _ in runs])
    costs = np.stack([c for _, c in runs])
    return RolloutResult(states=states, per_step_costs=costs, summed=cumulative_cost(costs))


def dump_trajectories(path: str | Path, result: RolloutResult, U: FloatArray) -> Path:
    """Write one row per (r, b, t): state at t, control at t, step cost at t."""
    R, B, T1, d = result.states.shape
    n = U.shape[2]
    columns = ["r", "b", "t", *[f"x{i}" for i in range(d)], *[f"u{i}" for i in range(n)], "cost"]
    rows = (
        [r, b, t, *result.states[r, b, t].tolist(), *U[b, t].tolist(), float(result.per_step_costs[r, b, t])]
        for r in range(R)
        for b in range(B)
        for t in range(T1 - 1)
    )
    return write_csv(path, "trajectories", columns, rows)
