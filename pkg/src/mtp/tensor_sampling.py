"""Random multipartite-graph control sampling.

A graph ``G(M, N)`` is stored as a waypoint tensor ``Z`` of shape
``(M, N, n)``: layer ``i`` holds ``N`` controls drawn uniformly from the
control box. A path picks one node per layer; paths are drawn with
replacement by sampling a ``(P, M)`` index matrix and gathering from ``Z``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from mtp import splines
from mtp.core import Box, FloatArray

INTERPOLATION_KINDS = ("linear", "bspline", "akima")


@dataclass(frozen=True)
class WaypointTensor:
    values: FloatArray  # (M, N, n)
    limits: Box

    @property
    def layers(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SampledWaypointBatch:
    values: FloatArray  # (P, M, n)
    indices: np.ndarray  # (P, M) layer-local node indices
    limits: Box


@dataclass(frozen=True)
class Interpolation:
    kind: str = "akima"
    degree: int = 2

    def __post_init__(self) -> None:
        if self.kind not in INTERPOLATION_KINDS:
            raise ValueError(f"unknown interpolation {self.kind!r}; expected one of {INTERPOLATION_KINDS}")
        if self.degree < 0:
            raise ValueError(f"B-spline degree must be >= 0, got {self.degree}")

    @classmethod
    def parse(cls, text: str) -> Interpolation:
        """Accepts ``linear``, ``akima``, ``bspline`` or ``bspline(p)``."""
        match = re.fullmatch(r"\s*(\w+)\s*(?:\(\s*(\d+)\s*\))?\s*", text)
        if match is None:
            raise ValueError(f"cannot parse interpolation {text!r}")
        kind, degree = match.group(1).lower(), match.group(2)
        if degree is not None and kind != "bspline":
            raise ValueError(f"only bspline takes a degree, got {text!r}")
        return cls(kind, int(degree) if degree is not None else 2)

    def __str__(self) -> str:
        return f"bspline({self.degree})" if self.kind == "bspline" else self.kind


def sample_waypoint_tensor(M: int, N: int, limits: Box, rng: np.random.Generator) -> WaypointTensor:
    if M < 2 or N < 1:
        raise ValueError(f"graph needs M >= 2 layers and N >= 1 nodes, got M={M}, N={N}")
    values = rng.uniform(limits.lo, limits.hi, size=(M, N, limits.dim))
    return WaypointTensor(values=values, limits=limits)


def sample_paths(Z: WaypointTensor, P: int, rng: np.random.Generator) -> SampledWaypointBatch:
    """Draw P paths uniformly with replacement; each of the N**M paths has mass N**-M."""
    if P < 0:
        raise ValueError(f"path count must be non-negative, got {P}")
    M = Z.layers
    indices = rng.integers(0, Z.width, size=(P, M))
    values = Z.values[np.arange(M)[None, :], indices]
    return SampledWaypointBatch(values=values, indices=indices, limits=Z.limits)


def interpolate_raw(C: FloatArray, method: Interpolation, T: int) -> FloatArray:
    if method.kind == "linear":
        return splines.linear_interpolate(C, T)
    if method.kind == "akima":
        return splines.akima_interpolate(C, T)
    basis = splines.bspline_basis_matrix(C.shape[1], method.degree, T)
    return splines.bspline_interpolate(basis, C)


def interpolate_controls(C: SampledWaypointBatch, method: Interpolation, T: int) -> FloatArray:
    """Interpolate sampled waypoints to ``(P, T, n)`` controls clipped to the box."""
    if C.values.shape[0] == 0:
        return np.empty((0, T, C.values.shape[2]))
    return C.limits.clip(interpolate_raw(C.values, method, T))
