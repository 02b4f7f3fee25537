"""Entropy and path-coverage instrumentation."""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from mtp.core import Box, FloatArray
from mtp.tensor_sampling import sample_waypoint_tensor

# Exhaustive path enumeration is used while N**M stays at or below this.
ENUMERATION_CAP = 4096


def cost_entropy(costs: FloatArray) -> float:
    """Entropy of the rollout-cost softmax ``P_j = exp(J_j) / sum_l exp(J_l)``.

    The softmax is taken over raw costs (positive sign). Infinite costs are
    dropped before normalizing; with fewer than two finite costs the
    entropy is zero.
    """
    J = np.asarray(costs, dtype=np.float64).ravel()
    J = J[np.isfinite(J)]
    if J.size < 2:
        return 0.0
    z = J - J.max()
    p = np.exp(z)
    p /= p.sum()
    nz = p > 0
    h = float(-np.sum(p[nz] * np.log(p[nz])))
    return min(max(h, 0.0), float(np.log(J.size)))


def tensor_entropy(M: int, N: int) -> float:
    """Entropy of the uniform distribution over the N**M paths of G(M, N), in nats."""
    if M < 1 or N < 1:
        raise ValueError(f"need M, N >= 1, got M={M}, N={N}")
    return M * float(np.log(N))


def gaussian_path_entropy(std: FloatArray) -> float:
    """Differential entropy of a diagonal Gaussian over T x n controls, in nats."""
    std = np.asarray(std, dtype=np.float64)
    if np.any(std <= 0):
        raise ValueError("standard deviations must be positive")
    k = std.size
    return 0.5 * k * (1.0 + np.log(2.0 * np.pi)) + float(np.sum(np.log(std)))


def empirical_index_entropy(indices: np.ndarray, miller_madow: bool = True) -> float:
    """Plug-in entropy of observed index sequences (rows of ``indices``), in nats."""
    indices = np.asarray(indices)
    _, counts = np.unique(indices, axis=0, return_counts=True)
    n = counts.sum()
    p = counts / n
    h = float(-np.sum(p * np.log(p)))
    if miller_madow:
        h += (counts.size - 1) / (2.0 * n)
    return h


@dataclass
class EntropyTrace:
    entropies: list[float] = field(default_factory=list)
    cost_hashes: list[str] = field(default_factory=list)

    def record(self, costs: FloatArray) -> float:
        h = cost_entropy(costs)
        self.entropies.append(h)
        digest = hashlib.sha256(np.ascontiguousarray(costs, dtype=np.float64).tobytes()).hexdigest()
        self.cost_hashes.append(digest[:16])
        return h

    def rows(self) -> list[list]:
        return [[i, h, c] for i, (h, c) in enumerate(zip(self.entropies, self.cost_hashes))]


# --------------------------------------------------------------------------- coverage


def circle_target(t: FloatArray) -> FloatArray:
    """Reference path ``(sin 2 pi t, cos 2 pi t) / 2``."""
    t = np.asarray(t, dtype=np.float64)
    return 0.5 * np.stack([np.sin(2 * np.pi * t), np.cos(2 * np.pi * t)], axis=-1)


def layer_times(M: int) -> FloatArray:
    return np.linspace(0.0, 1.0, M)


def min_path_distance_bruteforce(Z: FloatArray, target: FloatArray) -> float:
    """Min over all N**M paths of the L-inf distance at the layer knots."""
    M, N, _ = Z.shape
    paths = np.array(list(itertools.product(range(N), repeat=M)))  # (N**M, M)
    pts = Z[np.arange(M)[None, :], paths]
    return float(np.min(np.max(np.abs(pts - target), axis=(1, 2))))


def min_path_distance_layerwise(Z: FloatArray, target: FloatArray) -> float:
    """Same quantity via the per-layer nearest node; exact because max-of-min separates."""
    per_node = np.max(np.abs(Z - target[:, None, :]), axis=-1)  # (M, N)
    return float(np.max(np.min(per_node, axis=1)))


@dataclass(frozen=True)
class CoverageCell:
    M: int
    N: int
    distances: list[float]
    exhaustive: bool

    @property
    def median(self) -> float:
        return float(np.median(self.distances))

    @property
    def minimum(self) -> float:
        return float(np.min(self.distances))


@dataclass(frozen=True)
class CoverageReport:
    target: str
    cells: list[CoverageCell]

    @property
    def medians(self) -> list[float]:
        return [c.median for c in self.cells]

    def strictly_decreasing(self) -> bool:
        m = self.medians
        return all(b < a for a, b in zip(m, m[1:]))

    def draw_rows(self) -> list[list]:
        return [[c.M, c.N, i, d, c.exhaustive] for c in self.cells for i, d in enumerate(c.distances)]

    def summary_rows(self) -> list[list]:
        return [[c.M, c.N, len(c.distances), c.median, c.minimum, c.exhaustive] for c in self.cells]


def empirical_coverage(
    grid: Sequence[tuple[int, int]],
    draws: int,
    rng: np.random.Generator,
    target: Callable[[FloatArray], FloatArray] = circle_target,
    limits: Box | None = None,
    target_name: str = "circle",
) -> CoverageReport:
    """For each (M, N), sample ``draws`` graphs and record the closest path's distance.

    The target is sampled at the M uniform layer times. Cells with
    ``N**M <= ENUMERATION_CAP`` are enumerated exhaustively; larger cells use
    the per-layer decomposition, which gives the same value.
    """
    if draws < 1:
        raise ValueError(f"need at least one draw, got {draws}")
    cells = []
    for M, N in grid:
        g = target(layer_times(M))
        box = limits or Box.symmetric(1.0, g.shape[-1])
        exhaustive = N**M <= ENUMERATION_CAP
        dists = []
        for _ in range(draws):
            Z = sample_waypoint_tensor(M, N, box, rng).values
            if exhaustive:
                dists.append(min_path_distance_bruteforce(Z, g))
            else:
                dists.append(min_path_distance_layerwise(Z, g))
        cells.append(CoverageCell(M=M, N=N, distances=dists, exhaustive=exhaustive))
    return CoverageReport(target=target_name, cells=cells)
