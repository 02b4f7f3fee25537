"""Shared array types for control sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class Box:
    """Axis-aligned control-limit box ``lo <= u <= hi``."""

    lo: FloatArray
    hi: FloatArray

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=np.float64))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError(f"limit shapes differ: {lo.shape} vs {hi.shape}")
        if not np.all(lo < hi):
            raise ValueError(f"control limits require lo < hi, got lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def symmetric(cls, bound: float, dim: int) -> Box:
        return cls(np.full(dim, -bound), np.full(dim, bound))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def clip(self, u: ArrayLike) -> FloatArray:
        return np.clip(u, self.lo, self.hi)

    def contains(self, u: ArrayLike) -> bool:
        u = np.asarray(u)
        return bool(np.all(u >= self.lo) and np.all(u <= self.hi))
