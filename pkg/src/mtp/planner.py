"""Model Tensor Planning: beta-mixed tensor/local sampling with a softmax elite update.

One planning step:

1. sample a fresh waypoint tensor ``Z`` (M x N x n) on the control box;
2. draw ``P = min(floor(beta B), B - 1)`` graph paths and interpolate them;
3. draw ``B - P - 1`` clipped Gaussian samples around the nominal ``mu``;
4. stack local samples, tensor samples and ``mu`` into ``U`` (B x T x n);
5. roll out, keep the ``E`` cheapest candidates and refit ``(mu, sigma)``
   with softmax weights at temperature ``lambda``;
6. emit the first control of the cheapest evaluated candidate.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from mtp.core import Box, FloatArray
from mtp.diagnostics import cost_entropy
from mtp.envs import EnvironmentModel
from mtp.rollout import batch_rollout
from mtp.tensor_sampling import (
    Interpolation,
    interpolate_controls,
    sample_paths,
    sample_waypoint_tensor,
)

log = logging.getLogger(__name__)


class DegenerateUpdateWarning(RuntimeWarning):
    """Every candidate scored +inf; the distribution was left unchanged."""


@dataclass(frozen=True)
class GaussianControlDistribution:
    mean: FloatArray  # (T, n)
    std: FloatArray  # (T, n)

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.broadcast_to(np.asarray(self.std, dtype=np.float64), mean.shape).copy()
        if mean.ndim != 2:
            raise ValueError(f"mean must be (T, n), got {mean.shape}")
        if np.any(std < 0):
            raise ValueError("standard deviation must be non-negative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @classmethod
    def initial(cls, T: int, limits: Box, std: float | FloatArray) -> GaussianControlDistribution:
        mean = limits.clip(np.zeros((T, limits.dim)))
        return cls(mean, np.broadcast_to(np.asarray(std, dtype=np.float64), mean.shape))

    @property
    def horizon(self) -> int:
        return self.mean.shape[0]

    def shifted(self, steps: int = 1) -> GaussianControlDistribution:
        """Drop the first ``steps`` rows and repeat the last row to keep length T."""
        if steps <= 0:
            return self
        steps = min(steps, self.horizon)
        idx = np.minimum(np.arange(steps, steps + self.horizon), self.horizon - 1)
        return replace(self, mean=self.mean[idx], std=self.std[idx])


@dataclass(frozen=True)
class PlannerConfig:
    """Hyperparameters; defaults follow the Navigation settings (M=5, N=30, beta=1)."""

    M: int = 5
    N: int = 30
    B: int = 256
    T: int = 20
    beta: float = 1.0
    elites: int = 8
    temperature: float = 0.1
    smoothing: float = 0.0
    sigma_min: float = 0.05
    sigma_init: float = 1.0
    interpolation: Interpolation = field(default_factory=Interpolation)
    n_models: int = 1
    seed: int = 0
    fixed_std: bool = False
    softmax: bool = True

    def __post_init__(self) -> None:
        if isinstance(self.interpolation, str):
            object.__setattr__(self, "interpolation", Interpolation.parse(self.interpolation))
        self.validate()

    def validate(self) -> None:
        for name in ("M", "N", "B", "T", "elites", "n_models"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.M < 2:
            raise ValueError(f"need at least two layers, got M={self.M}")
        if self.B < 2:
            raise ValueError(f"need B >= 2 so the nominal is one candidate among others, got B={self.B}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.elites > self.B:
            raise ValueError(f"elites E={self.elites} exceeds batch B={self.B}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if not 0.0 <= self.smoothing < 1.0:
            raise ValueError(f"smoothing must lie in [0, 1), got {self.smoothing}")
        if not self.sigma_min > 0:
            raise ValueError(f"sigma_min must be positive, got {self.sigma_min}")

    @property
    def tensor_count(self) -> int:
        """``P = min(floor(beta B), B - 1)``; the last row is always the nominal."""
        return min(int(np.floor(self.beta * self.B)), self.B - 1)


@dataclass(frozen=True)
class EliteUpdateResult:
    new_mean: FloatArray
    new_std: FloatArray
    weights: FloatArray
    elite_indices: np.ndarray
    best_control: FloatArray
    best_index: int
    degenerate: bool = False


@dataclass(frozen=True)
class StepDiagnostics:
    costs: FloatArray
    elite_indices: np.ndarray
    entropy: float
    step: int = 0
    elapsed: float = 0.0

    @property
    def best_cost(self) -> float:
        return float(np.min(self.costs))

    @property
    def mean_cost(self) -> float:
        finite = self.costs[np.isfinite(self.costs)]
        return float(np.mean(finite)) if finite.size else float("inf")

    CSV_COLUMNS = ("step", "best_cost", "mean_cost", "entropy", "elapsed")

    def as_row(self) -> list:
        return [self.step, self.best_cost, self.mean_cost, self.entropy, self.elapsed]


class StepStreams(NamedTuple):
    tensor: np.random.Generator
    local: np.random.Generator


def step_streams(rng: np.random.Generator) -> StepStreams:
    """Split one planning step's randomness into independent tensor and local streams.

    Planners that draw only local samples consume the same ``local`` stream,
    so runs sharing a seed see identical Gaussian noise.
    """
    tensor, local = rng.spawn(2)
    return StepStreams(tensor=tensor, local=local)


def sample_local(
    dist: GaussianControlDistribution, count: int, limits: Box, rng: np.random.Generator
) -> FloatArray:
    noise = rng.standard_normal((count, *dist.mean.shape))
    return limits.clip(dist.mean + dist.std * noise)


def mix_samples(
    U_tensor: FloatArray,
    dist: GaussianControlDistribution,
    B: int,
    limits: Box,
    rng: np.random.Generator,
) -> FloatArray:
    """Stack ``[local; tensor; mu]`` into a ``(B, T, n)`` batch."""
    P = U_tensor.shape[0]
    if P > B - 1:
        raise ValueError(f"{P} tensor samples leave no room for the nominal in B={B}")
    local = sample_local(dist, B - P - 1, limits, rng)
    return np.concatenate([local, U_tensor, dist.mean[None]], axis=0)


def evaluate_candidates(
    U: FloatArray, models: Sequence[EnvironmentModel], x0: FloatArray
) -> tuple[FloatArray, FloatArray]:
    """Return the per-candidate cost ``s`` (B,) and the R-averaged cost matrix ``S`` (B, T)."""
    result = batch_rollout(models, x0, U)
    return result.summed, np.mean(result.per_step_costs, axis=0)


def softmax_weights(costs: FloatArray, temperature: float) -> FloatArray:
    """``exp(-(s - min s) / lambda)`` normalized; infinite costs get zero weight."""
    costs = np.asarray(costs, dtype=np.float64)
    with np.errstate(over="ignore"):
        w = np.exp(-(costs - np.min(costs)) / temperature)
    return w / np.sum(w)


def select_elites(costs: FloatArray, E: int) -> np.ndarray:
    """Indices of the E cheapest candidates, cheapest first; ties go to the lower index."""
    return np.argsort(costs, kind="stable")[:E]


def weighted_moments(samples: FloatArray, weights: FloatArray) -> tuple[FloatArray, FloatArray]:
    """Weighted mean and variance over the leading axis.

    Candidates are accumulated in increasing index order, so any caller
    passing the same rows and weights gets bit-identical moments.
    """
    w = weights[:, None, None]
    mean = np.sum(w * samples, axis=0)
    var = np.sum(w * (samples - mean) ** 2, axis=0)
    return mean, var


def softmax_elite_update(
    U: FloatArray,
    s: FloatArray,
    config: PlannerConfig,
    dist: GaussianControlDistribution,
) -> EliteUpdateResult:
    s = np.asarray(s, dtype=np.float64)
    elites = select_elites(s, config.elites)
    best = int(elites[0])
    if not np.isfinite(s[best]):
        warnings.warn("all candidates diverged; keeping the previous distribution", DegenerateUpdateWarning, stacklevel=2)
        return EliteUpdateResult(
            new_mean=dist.mean, new_std=dist.std, weights=np.full(elites.size, 1.0 / elites.size),
            elite_indices=elites, best_control=U[best, 0].copy(), best_index=best, degenerate=True,
        )

    # moments are accumulated in candidate-index order
    ordered = np.sort(elites)
    if config.softmax:
        w = softmax_weights(s[ordered], config.temperature)
    else:
        w = np.full(ordered.size, 1.0 / ordered.size)
    mean_new, var_new = weighted_moments(U[ordered], w)
    std_new = np.sqrt(np.maximum(var_new, config.sigma_min**2))

    a = config.smoothing
    mean = mean_new + a * (dist.mean - mean_new) if a else mean_new
    if config.fixed_std:
        std = dist.std
    else:
        std = std_new + a * (dist.std - std_new) if a else std_new

    weights = w[np.searchsorted(ordered, elites)]  # reported in elite (cost) order
    return EliteUpdateResult(
        new_mean=mean, new_std=std, weights=weights, elite_indices=elites,
        best_control=U[best, 0].copy(), best_index=best,
    )


def tensor_samples(config: PlannerConfig, limits: Box, rng: np.random.Generator) -> FloatArray:
    Z = sample_waypoint_tensor(config.M, config.N, limits, rng)
    C = sample_paths(Z, config.tensor_count, rng)
    return interpolate_controls(C, config.interpolation, config.T)


def plan_step(
    x0: FloatArray,
    dist: GaussianControlDistribution,
    config: PlannerConfig,
    models: Sequence[EnvironmentModel],
    rng: np.random.Generator,
) -> tuple[FloatArray, GaussianControlDistribution, StepDiagnostics]:
    """Run one planning iteration; returns ``(u*, updated distribution, diagnostics)``.

    The returned distribution is not time-shifted; receding-horizon callers
    apply :meth:`GaussianControlDistribution.shifted` after executing ``u*``.
    """
    limits = models[0].limits
    streams = step_streams(rng)
    U_tensor = tensor_samples(config, limits, streams.tensor)
    U = mix_samples(U_tensor, dist, config.B, limits, streams.local)
    s, _ = evaluate_candidates(U, models, x0)
    result = softmax_elite_update(U, s, config, dist)
    new_dist = GaussianControlDistribution(limits.clip(result.new_mean), result.new_std)
    diag = StepDiagnostics(costs=s, elite_indices=result.elite_indices, entropy=cost_entropy(s))
    return result.best_control, new_dist, diag


class MTPPlanner:
    """Receding-horizon wrapper holding a config and the randomized model set."""

    kind = "mtp"

    def __init__(self, config: PlannerConfig) -> None:
        self.config = config

    @property
    def label(self) -> str:
        return f"mtp-{self.config.interpolation}"

    def initial_distribution(self, limits: Box) -> GaussianControlDistribution:
        return GaussianControlDistribution.initial(self.config.T, limits, self.config.sigma_init)

    def step(self, x0, dist, models, rng):
        return plan_step(x0, dist, self.config, models, rng)
