"""Analytic environments and domain randomization.

Every model is an immutable dataclass whose ``step``, ``running_cost``,
``terminal_cost`` and ``success`` methods broadcast over leading batch
dimensions: states are ``(..., d)`` and controls ``(..., n)``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from mtp.core import Box, FloatArray

LAYOUT_SCHEMA = "mtp-layout/1"


class EnvironmentModel:
    """Base contract shared by all environments."""

    name: str = "env"
    state_dim: int
    control_dim: int
    dt: float

    @property
    def limits(self) -> Box:
        raise NotImplementedError

    def initial_state(self) -> FloatArray:
        raise NotImplementedError

    def step(self, x: FloatArray, u: FloatArray) -> FloatArray:
        raise NotImplementedError

    def running_cost(self, x: FloatArray, u: FloatArray) -> FloatArray:
        raise NotImplementedError

    def terminal_cost(self, x: FloatArray) -> FloatArray:
        raise NotImplementedError

    def success(self, x: FloatArray) -> bool:
        raise NotImplementedError

    def validate(self) -> None:
        """Raise ``ValueError`` when parameters are non-physical."""
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


# --------------------------------------------------------------------------- navigation


@dataclass(frozen=True)
class Layout:
    """Rectangular obstacles ``(x_min, y_min, x_max, y_max)`` inside a square workspace."""

    rectangles: FloatArray
    start: FloatArray
    goal: FloatArray
    bounds: tuple[float, float, float, float] = (-2.0, -2.0, 2.0, 2.0)
    name: str = "custom"

    def __post_init__(self) -> None:
        rects = np.asarray(self.rectangles, dtype=np.float64).reshape(-1, 4)
        if np.any(rects[:, 0] >= rects[:, 2]) or np.any(rects[:, 1] >= rects[:, 3]):
            raise ValueError("rectangles need x_min < x_max and y_min < y_max")
        object.__setattr__(self, "rectangles", rects)
        object.__setattr__(self, "start", np.asarray(self.start, dtype=np.float64))
        object.__setattr__(self, "goal", np.asarray(self.goal, dtype=np.float64))
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))

    def walls(self, thickness: float = 1.0) -> FloatArray:
        """Obstacles plus four slabs enclosing the workspace."""
        x0, y0, x1, y1 = self.bounds
        t = thickness
        border = np.array(
            [
                [x0 - t, y0 - t, x0, y1 + t],
                [x1, y0 - t, x1 + t, y1 + t],
                [x0 - t, y0 - t, x1 + t, y0],
                [x0 - t, y1, x1 + t, y1 + t],
            ]
        )
        return np.concatenate([self.rectangles, border], axis=0)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Layout:
        schema = data.get("schema")
        if schema != LAYOUT_SCHEMA:
            raise ValueError(f"unsupported layout schema {schema!r}, expected {LAYOUT_SCHEMA!r}")
        return cls(
            rectangles=data["rectangles"],
            start=data["start"],
            goal=data["goal"],
            bounds=tuple(data.get("bounds", (-2.0, -2.0, 2.0, 2.0))),
            name=data.get("name", "custom"),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": LAYOUT_SCHEMA,
            "name": self.name,
            "bounds": list(self.bounds),
            "start": self.start.tolist(),
            "goal": self.goal.tolist(),
            "rectangles": self.rectangles.tolist(),
        }


def load_layout(path: str | Path | None = None) -> Layout:
    """Read a layout file; ``None`` loads the bundled U-trap layout."""
    if path is None:
        text = resources.files("mtp.layouts").joinpath("u_trap.json").read_text()
    else:
        text = Path(path).read_text()
    return Layout.from_dict(json.loads(text))


def box_distance(points: FloatArray, rects: FloatArray) -> FloatArray:
    """Euclidean distance from each point to each rectangle, ``(..., K)``; zero inside."""
    p = np.asarray(points, dtype=np.float64)[..., None, :]
    dx = np.maximum(np.maximum(rects[:, 0] - p[..., 0], 0.0), p[..., 0] - rects[:, 2])
    dy = np.maximum(np.maximum(rects[:, 1] - p[..., 1], 0.0), p[..., 1] - rects[:, 3])
    return np.hypot(dx, dy)


def sweep_clamp(pos: FloatArray, delta: FloatArray, boxes: FloatArray) -> FloatArray:
    """Move ``pos`` by ``delta``, stopping where the segment first enters an open box.

    The stop point is snapped exactly onto the entered face so it is never
    strictly inside any box. Motion along or away from a face is free.
    """
    pos = np.asarray(pos, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    p = pos[..., None, :]  # (..., 1, 2)
    d = delta[..., None, :]
    lo = boxes[:, :2]
    hi = boxes[:, 2:]
    moving = d != 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - p) / d
        t2 = (hi - p) / d
    inside = (p > lo) & (p < hi)
    t_lo = np.where(moving, np.minimum(t1, t2), np.where(inside, -np.inf, np.inf))
    t_hi = np.where(moving, np.maximum(t1, t2), np.where(inside, np.inf, -np.inf))
    axis = np.argmax(t_lo, axis=-1)  # (..., K)
    t_enter = np.max(t_lo, axis=-1)
    t_exit = np.min(t_hi, axis=-1)
    hit = (t_enter < t_exit) & (t_exit > 0.0) & (t_enter < 1.0)
    t_hit = np.where(hit, np.maximum(t_enter, 0.0), np.inf)
    first = np.argmin(t_hit, axis=-1)  # (...,)
    t = np.take_along_axis(t_hit, first[..., None], axis=-1)[..., 0]
    blocked = np.isfinite(t)
    t = np.where(blocked, t, 1.0)
    new = pos + t[..., None] * delta

    if np.any(blocked):
        hit_axis = np.take_along_axis(axis, first[..., None], axis=-1)[..., 0]
        box = boxes[first]  # (..., 4)
        d_axis = np.take_along_axis(delta, hit_axis[..., None], axis=-1)[..., 0]
        face = np.where(
            d_axis > 0,
            np.take_along_axis(box, hit_axis[..., None], axis=-1)[..., 0],
            np.take_along_axis(box, hit_axis[..., None] + 2, axis=-1)[..., 0],
        )
        for a in range(pos.shape[-1]):
            snap = blocked & (hit_axis == a)
            new[..., a] = np.where(snap, face, new[..., a])
    return new


@dataclass(frozen=True)
class NavigationEnv(EnvironmentModel):
    """Planar point mass under velocity control among rectangular walls.

    State is the 2-D position; the control is the commanded velocity,
    scaled by ``gain``. Walls are inflated by the agent radius for
    collision, and motion stops where it first touches an inflated wall.
    """

    layout: Layout = field(default_factory=load_layout)
    wall_weight: float = 1.0
    goal_weight: float = 1.0
    control_weight: float = 0.01
    wall_decay: float = 10.0
    terminal_weight: float = 10.0
    dt: float = 0.05
    radius: float = 0.05
    gain: float = 2.0
    max_speed: float = 1.0
    success_radius: float = 0.1
    name: str = "navigation"
    state_dim: int = 2
    control_dim: int = 2

    def __post_init__(self) -> None:
        self.validate()
        object.__setattr__(self, "_walls", self.layout.walls())
        r = self.radius
        object.__setattr__(self, "_inflated", self._walls + np.array([-r, -r, r, r]))

    def validate(self) -> None:
        super().validate()
        if self.gain <= 0:
            raise ValueError(f"actuation gain must be positive, got {self.gain}")
        if self.radius < 0:
            raise ValueError(f"radius must be non-negative, got {self.radius}")
        inflated = self.layout.walls() + np.array([-self.radius, -self.radius, self.radius, self.radius])
        for label, point in (("goal", self.layout.goal), ("start", self.layout.start)):
            if self.signed_clearance(point, inflated) <= 0:
                raise ValueError(f"{label} {point.tolist()} is not in free space")

    @staticmethod
    def signed_clearance(point: FloatArray, boxes: FloatArray) -> float:
        p = np.asarray(point, dtype=np.float64)
        outside = box_distance(p, boxes)
        depth = np.minimum.reduce(
            [p[0] - boxes[:, 0], boxes[:, 2] - p[0], p[1] - boxes[:, 1], boxes[:, 3] - p[1]]
        )
        return float(np.min(np.where(outside > 0, outside, -depth)))

    @property
    def limits(self) -> Box:
        return Box.symmetric(self.max_speed, 2)

    @property
    def walls(self) -> FloatArray:
        return self._walls

    @property
    def inflated_walls(self) -> FloatArray:
        return self._inflated

    def initial_state(self) -> FloatArray:
        return self.layout.start.copy()

    def wall_distance(self, x: FloatArray) -> FloatArray:
        return np.min(box_distance(x, self._walls), axis=-1)

    def step(self, x: FloatArray, u: FloatArray) -> FloatArray:
        return sweep_clamp(x, self.gain * np.asarray(u) * self.dt, self._inflated)

    def _state_cost(self, x: FloatArray) -> FloatArray:
        diff = np.asarray(x) - self.layout.goal
        proximity = self.wall_weight * np.exp(-self.wall_decay * self.wall_distance(x))
        return proximity + self.goal_weight * np.sum(diff * diff, axis=-1)

    def running_cost(self, x: FloatArray, u: FloatArray) -> FloatArray:
        u = np.asarray(u)
        return self._state_cost(x) + self.control_weight * np.sum(u * u, axis=-1)

    def terminal_cost(self, x: FloatArray) -> FloatArray:
        return self.terminal_weight * self._state_cost(x)

    def success(self, x: FloatArray) -> bool:
        return bool(np.linalg.norm(np.asarray(x) - self.layout.goal) < self.success_radius)


# --------------------------------------------------------------------------- double integrator


@dataclass(frozen=True)
class DoubleIntegratorEnv(EnvironmentModel):
    """Point mass per axis, ``p' = p + v dt``, ``v' = v + u dt``; state ``(p, v)``."""

    goal: tuple[float, ...] = (0.0, 0.0)
    start: tuple[float, ...] = (-1.0, 0.6)
    position_weight: float = 1.0
    velocity_weight: float = 0.1
    control_weight: float = 0.01
    terminal_weight: float = 1.0
    dt: float = 0.05
    max_accel: float = 1.0
    success_radius: float = 0.1
    success_speed: float = 0.2
    name: str = "double_integrator"

    def __post_init__(self) -> None:
        if len(self.goal) != len(self.start):
            raise ValueError("goal and start must have the same dimension")
        self.validate()

    @property
    def axes(self) -> int:
        return len(self.goal)

    @property
    def state_dim(self) -> int:
        return 2 * self.axes

    @property
    def control_dim(self) -> int:
        return self.axes

    @property
    def limits(self) -> Box:
        return Box.symmetric(self.max_accel, self.axes)

    def initial_state(self) -> FloatArray:
        return np.concatenate([np.asarray(self.start, dtype=np.float64), np.zeros(self.axes)])

    def step(self, x: FloatArray, u: FloatArray) -> FloatArray:
        x = np.asarray(x, dtype=np.float64)
        k = self.axes
        p, v = x[..., :k], x[..., k:]
        return np.concatenate([p + v * self.dt, v + np.asarray(u) * self.dt], axis=-1)

    def _state_cost(self, x: FloatArray) -> FloatArray:
        x = np.asarray(x)
        k = self.axes
        e = x[..., :k] - np.asarray(self.goal)
        v = x[..., k:]
        return self.position_weight * np.sum(e * e, axis=-1) + self.velocity_weight * np.sum(v * v, axis=-1)

    def running_cost(self, x: FloatArray, u: FloatArray) -> FloatArray:
        u = np.asarray(u)
        return self._state_cost(x) + self.control_weight * np.sum(u * u, axis=-1)

    def terminal_cost(self, x: FloatArray) -> FloatArray:
        return self.terminal_weight * self._state_cost(x)

    def success(self, x: FloatArray) -> bool:
        x = np.asarray(x)
        k = self.axes
        near = np.linalg.norm(x[:k] - np.asarray(self.goal)) < self.success_radius
        slow = np.linalg.norm(x[k:]) < self.success_speed
        return bool(near and slow)


# --------------------------------------------------------------------------- pendulum


def wrap_angle(theta: FloatArray) -> FloatArray:
    """Map angles to ``[-pi, pi)``."""
    return (np.asarray(theta) + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class PendulumEnv(EnvironmentModel):
    """Torque-limited pendulum, ``theta = 0`` hanging and ``theta = pi`` upright.

    ``theta'' = -(g / l) sin(theta) + u / (m l^2) - damping * theta'``,
    integrated with semi-implicit Euler. The torque limit must stay below
    ``m g l`` so the swing-up needs energy pumping.
    """

    mass: float = 1.0
    length: float = 1.0
    gravity: float = 9.81
    damping: float = 0.1
    max_torque: float = 5.0
    angle_weight: float = 1.0
    velocity_weight: float = 0.1
    control_weight: float = 0.001
    terminal_weight: float = 1.0
    dt: float = 0.05
    start: tuple[float, float] = (0.0, 0.0)
    success_angle: float = 0.2
    success_speed: float = 1.0
    name: str = "pendulum"
    state_dim: int = 2
    control_dim: int = 1

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        super().validate()
        if self.mass <= 0 or self.length <= 0:
            raise ValueError(f"mass and length must be positive, got m={self.mass}, l={self.length}")
        if self.damping < 0:
            raise ValueError(f"damping must be non-negative, got {self.damping}")
        if not 0 < self.max_torque < self.mass * self.gravity * self.length:
            raise ValueError(
                f"torque limit {self.max_torque} must lie in (0, m g l = "
                f"{self.mass * self.gravity * self.length:.3f})"
            )

    @property
    def limits(self) -> Box:
        return Box.symmetric(self.max_torque, 1)

    def initial_state(self) -> FloatArray:
        return np.asarray(self.start, dtype=np.float64)

    def step(self, x: FloatArray, u: FloatArray) -> FloatArray:
        x = np.asarray(x, dtype=np.float64)
        theta, omega = x[..., 0], x[..., 1]
        torque = np.asarray(u)[..., 0]
        accel = (
            -(self.gravity / self.length) * np.sin(theta)
            + torque / (self.mass * self.length**2)
            - self.damping * omega
        )
        omega_next = omega + self.dt * accel
        return np.stack([theta + self.dt * omega_next, omega_next], axis=-1)

    def angle_error(self, x: FloatArray) -> FloatArray:
        return wrap_angle(np.asarray(x)[..., 0] - np.pi)

    def _state_cost(self, x: FloatArray) -> FloatArray:
        err = self.angle_error(x)
        omega = np.asarray(x)[..., 1]
        return self.angle_weight * err * err + self.velocity_weight * omega * omega

    def running_cost(self, x: FloatArray, u: FloatArray) -> FloatArray:
        torque = np.asarray(u)[..., 0]
        return self._state_cost(x) + self.control_weight * torque * torque

    def terminal_cost(self, x: FloatArray) -> FloatArray:
        return self.terminal_weight * self._state_cost(x)

    def success(self, x: FloatArray) -> bool:
        x = np.asarray(x)
        return bool(abs(self.angle_error(x)) < self.success_angle and abs(x[1]) < self.success_speed)


@dataclass(frozen=True)
class ZeroCostEnv(EnvironmentModel):
    """Single integrator with identically zero cost; used for plumbing checks."""

    dim: int = 1
    dt: float = 0.05
    name: str = "zero"

    @property
    def state_dim(self) -> int:
        return self.dim

    @property
    def control_dim(self) -> int:
        return self.dim

    @property
    def limits(self) -> Box:
        return Box.symmetric(1.0, self.dim)

    def initial_state(self) -> FloatArray:
        return np.zeros(self.dim)

    def step(self, x: FloatArray, u: FloatArray) -> FloatArray:
        return np.asarray(x, dtype=np.float64) + np.asarray(u) * self.dt

    def running_cost(self, x: FloatArray, u: FloatArray) -> FloatArray:
        return np.zeros(np.shape(x)[:-1])

    def terminal_cost(self, x: FloatArray) -> FloatArray:
        return np.zeros(np.shape(x)[:-1])

    def success(self, x: FloatArray) -> bool:
        return False


ENVIRONMENTS: dict[str, Callable[..., EnvironmentModel]] = {
    "navigation": NavigationEnv,
    "double_integrator": DoubleIntegratorEnv,
    "pendulum": PendulumEnv,
    "zero": ZeroCostEnv,
}


def make_env(name: str, **params: Any) -> EnvironmentModel:
    try:
        factory = ENVIRONMENTS[name]
    except KeyError:
        raise KeyError(f"unknown environment {name!r}; known: {sorted(ENVIRONMENTS)}") from None
    if name == "navigation" and "layout" in params and not isinstance(params["layout"], Layout):
        params = {**params, "layout": load_layout(params["layout"])}
    for key in ("goal", "start"):
        if key in params and name != "navigation":
            params = {**params, key: tuple(float(v) for v in np.atleast_1d(params[key]))}
    return factory(**params)


# --------------------------------------------------------------------------- randomization


@dataclass(frozen=True)
class Perturbation:
    """Parameter perturbation: ``uniform`` adds U(low, high), ``relative`` scales by 1 + U(low, high)."""

    kind: str
    low: float
    high: float

    def __post_init__(self) -> None:
        if self.kind not in ("uniform", "relative"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.low > self.high:
            raise ValueError(f"perturbation needs low <= high, got ({self.low}, {self.high})")

    def apply(self, value: float, rng: np.random.Generator) -> float:
        if self.low == self.high:
            offset = self.low
        else:
            offset = rng.uniform(self.low, self.high)
        return value + offset if self.kind == "uniform" else value * (1.0 + offset)


@dataclass(frozen=True)
class DomainRandomizer:
    base: EnvironmentModel
    perturbations: dict[str, Perturbation] = field(default_factory=dict)
    count: int = 1

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError(f"need at least one model, got R={self.count}")
        fields = {f.name for f in dataclasses.fields(self.base)}
        unknown = set(self.perturbations) - fields
        if unknown:
            raise ValueError(f"{type(self.base).__name__} has no parameters {sorted(unknown)}")


MAX_RESAMPLE = 100


def randomize_models(randomizer: DomainRandomizer, rng: np.random.Generator) -> list[EnvironmentModel]:
    """Draw R perturbed copies of the base model.

    Draws that make a model non-physical are retried; after
    ``MAX_RESAMPLE`` failures a ``ValueError`` is raised.
    """
    if not randomizer.perturbations:
        return [randomizer.base] * randomizer.count
    models = []
    for _ in range(randomizer.count):
        for _attempt in range(MAX_RESAMPLE):
            changes = {
                name: pert.apply(getattr(randomizer.base, name), rng)
                for name, pert in sorted(randomizer.perturbations.items())
            }
            try:
                models.append(dataclasses.replace(randomizer.base, **changes))
                break
            except ValueError:
                continue
        else:
            raise ValueError(f"no valid model after {MAX_RESAMPLE} draws of {sorted(randomizer.perturbations)}")
    return models
