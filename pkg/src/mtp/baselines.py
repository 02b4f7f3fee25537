"""Reference sampling-based MPC planners: CEM, MPPI and Predictive Sampling.

All three draw local Gaussian samples from the same ``local`` stream as the
tensor planner (see :func:`mtp.planner.step_streams`), so shared seeds give
shared noise. MPPI and PS keep the current nominal as the last candidate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from mtp.core import FloatArray
from mtp.diagnostics import cost_entropy
from mtp.envs import EnvironmentModel
from mtp.planner import (
    DegenerateUpdateWarning,
    GaussianControlDistribution,
    StepDiagnostics,
    evaluate_candidates,
    sample_local,
    select_elites,
    softmax_weights,
    step_streams,
    weighted_moments,
)

BASELINE_KINDS = ("cem", "mppi", "ps")


@dataclass(frozen=True)
class BaselineConfig:
    kind: str = "mppi"
    B: int = 256
    T: int = 20
    sigma: float = 1.0
    temperature: float = 0.1
    elites: int = 32
    smoothing: float = 0.0
    sigma_min: float = 0.05
    eq4_literal: bool = False
    n_models: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline {self.kind!r}; expected one of {BASELINE_KINDS}")
        if self.B < 2:
            raise ValueError(f"need B >= 2, got {self.B}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if not 1 <= self.elites <= self.B:
            raise ValueError(f"elites must lie in [1, B], got {self.elites}")
        if not 0.0 <= self.smoothing < 1.0:
            raise ValueError(f"smoothing must lie in [0, 1), got {self.smoothing}")


def _candidates(dist, B, limits, rng) -> FloatArray:
    local = sample_local(dist, B - 1, limits, step_streams(rng).local)
    return np.concatenate([local, dist.mean[None]], axis=0)


def cem_elite_moments(elites: FloatArray, B: int, literal: bool = False) -> tuple[FloatArray, FloatArray]:
    """Unweighted elite mean and variance.

    By default divides by E and E - 1; ``literal=True`` divides by B and
    B - 1 over the same elite sum.
    """
    E = elites.shape[0]
    n_mean, n_var = (B, B - 1) if literal else (E, max(E - 1, 1))
    mean = np.sum(elites, axis=0) / n_mean
    var = np.sum((elites - mean) ** 2, axis=0) / n_var
    return mean, var


def cem_step(
    x0: FloatArray,
    dist: GaussianControlDistribution,
    B: int,
    E: int,
    smoothing: float,
    models: Sequence[EnvironmentModel],
    rng: np.random.Generator,
    sigma_min: float = 0.05,
    eq4_literal: bool = False,
) -> tuple[FloatArray, GaussianControlDistribution, StepDiagnostics]:
    """One CEM iteration with B fresh Gaussian samples and exponential smoothing."""
    if not 1 <= E <= B:
        raise ValueError(f"elites must lie in [1, B={B}], got {E}")
    limits = models[0].limits
    U = sample_local(dist, B, limits, step_streams(rng).local)
    s, _ = evaluate_candidates(U, models, x0)
    elites = select_elites(s, E)
    diag = StepDiagnostics(costs=s, elite_indices=elites, entropy=cost_entropy(s))
    if not np.isfinite(s[elites[0]]):
        warnings.warn("all CEM candidates diverged; holding the distribution", DegenerateUpdateWarning, stacklevel=2)
        return dist.mean[0].copy(), dist, diag
    mean_new, var_new = cem_elite_moments(U[np.sort(elites)], B, eq4_literal)
    std_new = np.sqrt(np.maximum(var_new, sigma_min**2))
    a = smoothing
    mean = limits.clip(a * dist.mean + (1.0 - a) * mean_new)
    std = a * dist.std + (1.0 - a) * std_new
    new = GaussianControlDistribution(mean, std)
    return new.mean[0].copy(), new, diag


def mppi_step(
    x0: FloatArray,
    dist: GaussianControlDistribution,
    temperature: float,
    models: Sequence[EnvironmentModel],
    rng: np.random.Generator,
    B: int,
) -> tuple[FloatArray, GaussianControlDistribution, StepDiagnostics]:
    """Softmax-weighted mean over all B candidates; sigma stays fixed."""
    limits = models[0].limits
    U = _candidates(dist, B, limits, rng)
    s, _ = evaluate_candidates(U, models, x0)
    order = select_elites(s, B)
    diag = StepDiagnostics(costs=s, elite_indices=order, entropy=cost_entropy(s))
    if not np.isfinite(s[order[0]]):
        warnings.warn("all MPPI candidates diverged; holding the nominal", DegenerateUpdateWarning, stacklevel=2)
        return dist.mean[0].copy(), dist, diag
    idx = np.arange(B)
    w = softmax_weights(s[idx], temperature)
    mean, _ = weighted_moments(U[idx], w)
    new = GaussianControlDistribution(limits.clip(mean), dist.std)
    return new.mean[0].copy(), new, diag


def ps_step(
    x0: FloatArray,
    dist: GaussianControlDistribution,
    models: Sequence[EnvironmentModel],
    rng: np.random.Generator,
    B: int,
) -> tuple[FloatArray, GaussianControlDistribution, StepDiagnostics]:
    """Replace the nominal by the cheapest of B - 1 noisy samples and itself."""
    limits = models[0].limits
    U = _candidates(dist, B, limits, rng)
    s, _ = evaluate_candidates(U, models, x0)
    best = int(select_elites(s, 1)[0])
    diag = StepDiagnostics(costs=s, elite_indices=np.array([best]), entropy=cost_entropy(s))
    new = GaussianControlDistribution(limits.clip(U[best]), dist.std)
    return U[best, 0].copy(), new, diag


class BaselinePlanner:
    def __init__(self, config: BaselineConfig) -> None:
        self.config = config

    @property
    def kind(self) -> str:
        return self.config.kind

    @property
    def label(self) -> str:
        return self.config.kind

    def initial_distribution(self, limits) -> GaussianControlDistribution:
        return GaussianControlDistribution.initial(self.config.T, limits, self.config.sigma)

    def step(self, x0, dist, models, rng):
        c = self.config
        if c.kind == "cem":
            return cem_step(x0, dist, c.B, c.elites, c.smoothing, models, rng, c.sigma_min, c.eq4_literal)
        if c.kind == "mppi":
            return mppi_step(x0, dist, c.temperature, models, rng, c.B)
        return ps_step(x0, dist, models, rng, c.B)
