"""Batched interpolation kernels mapping M control-waypoints to T-step trajectories.

Three interpolants are provided:

* uniform unclamped B-splines, evaluated as an ``M x T`` basis matrix so a
  whole batch is interpolated with one ``einsum``;
* Akima splines (piecewise cubic, C1, local slopes);
* straight-line interpolation with ``floor(T / M)`` points per segment.

Waypoint batches have shape ``(B, M, n)`` and trajectories ``(B, T, n)``.
Evaluation times are ``t_j = j / T`` for ``j = 0..T-1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mtp.core import FloatArray

# Relative slack on the interior knot span when deciding which columns are normalized.
_SPAN_EPS = 1e-12


@dataclass(frozen=True)
class KnotSequence:
    knots: FloatArray

    def __post_init__(self) -> None:
        knots = np.asarray(self.knots, dtype=np.float64)
        if knots.ndim != 1 or knots.size < 2:
            raise ValueError("a knot sequence needs at least two knots")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be non-decreasing")
        object.__setattr__(self, "knots", knots)

    def __len__(self) -> int:
        return self.knots.size

    @classmethod
    def bspline(cls, M: int, p: int) -> KnotSequence:
        """Uniform unclamped knots for M basis functions of degree p, spanning [0, 1]."""
        return cls(np.arange(M + p + 1, dtype=np.float64) / (M + p))

    @classmethod
    def layers(cls, M: int) -> KnotSequence:
        """One knot per layer, uniform on [0, 1]."""
        return cls(np.linspace(0.0, 1.0, M))


@dataclass(frozen=True)
class SplineBasisMatrix:
    """``values[i, j] = B_{i,p}(t_j)``."""

    values: FloatArray
    degree: int
    eval_times: FloatArray
    knots: KnotSequence

    @property
    def n_basis(self) -> int:
        return self.values.shape[0]

    @property
    def horizon(self) -> int:
        return self.values.shape[1]

    def interior_mask(self) -> np.ndarray:
        """Columns whose time lies in ``[t_p, t_M]``, where the basis sums to one."""
        k = self.knots.knots
        lo, hi = k[self.degree], k[self.n_basis]
        t = self.eval_times
        return (t >= lo - _SPAN_EPS) & (t <= hi + _SPAN_EPS)


@dataclass(frozen=True)
class AkimaCoefficients:
    """Per-segment cubic coefficients, ``coeffs[b, i] = (a_i, b_i, c_i, d_i)``."""

    coeffs: FloatArray  # (B, M-1, 4, n)
    knots: KnotSequence


def eval_times(T: int) -> FloatArray:
    return np.arange(T, dtype=np.float64) / T


def bspline_basis_matrix(M: int, p: int, T: int) -> SplineBasisMatrix:
    """Build the ``M x T`` B-spline matrix with the Cox-de Boor recursion.

    Degree-0 functions are half-open indicators ``[t_i, t_{i+1})`` so every
    evaluation time belongs to exactly one cell.
    """
    if p < 0:
        raise ValueError(f"degree must be non-negative, got {p}")
    if M <= p:
        raise ValueError(f"need M >= p + 1 basis functions, got M={M}, p={p}")
    if T < 2:
        raise ValueError(f"horizon must be at least 2, got T={T}")

    knots = KnotSequence.bspline(M, p)
    k = knots.knots
    t = eval_times(T)

    basis = ((k[:-1, None] <= t[None, :]) & (t[None, :] < k[1:, None])).astype(np.float64)
    for deg in range(1, p + 1):
        n_rows = basis.shape[0] - 1
        left_k = k[:n_rows, None]
        left = (t[None, :] - left_k) / (k[deg : deg + n_rows, None] - left_k)
        right_k = k[deg + 1 : deg + 1 + n_rows, None]
        right = (right_k - t[None, :]) / (right_k - k[1 : 1 + n_rows, None])
        basis = left * basis[:-1] + right * basis[1:]

    return SplineBasisMatrix(values=basis, degree=p, eval_times=t, knots=knots)


def bspline_interpolate(basis: SplineBasisMatrix, waypoints: FloatArray) -> FloatArray:
    waypoints = np.asarray(waypoints, dtype=np.float64)
    if waypoints.ndim != 3 or waypoints.shape[1] != basis.n_basis:
        raise ValueError(
            f"waypoints of shape {waypoints.shape} do not match a basis with "
            f"{basis.n_basis} rows"
        )
    return np.einsum("mt,bmn->btn", basis.values, waypoints)


def _segment_slopes(waypoints: FloatArray, knots: KnotSequence) -> FloatArray:
    h = np.diff(knots.knots)
    if np.any(h <= 0):
        raise ValueError("zero-width knot interval")
    return np.diff(waypoints, axis=1) / h[None, :, None]


def akima_slopes(waypoints: FloatArray, knots: KnotSequence) -> FloatArray:
    """Node slopes: end rules on the two outer nodes at each side, Akima weights inside.

    When both weights vanish the slope falls back to the mean of the two
    adjacent segment slopes.
    """
    waypoints = np.asarray(waypoints, dtype=np.float64)
    M = waypoints.shape[1]
    if M < 2 or len(knots) != M:
        raise ValueError(f"need M >= 2 waypoints matching {len(knots)} knots, got M={M}")
    m = _segment_slopes(waypoints, knots)
    s = np.empty_like(waypoints)

    if M == 2:
        s[:, 0] = m[:, 0]
        s[:, 1] = m[:, 0]
        return s

    s[:, 0] = m[:, 0]
    s[:, 1] = 0.5 * (m[:, 0] + m[:, 1])
    s[:, M - 2] = 0.5 * (m[:, M - 3] + m[:, M - 2])
    s[:, M - 1] = m[:, M - 2]

    if M >= 5:
        # nodes i = 2..M-3 see slopes m[i-2], m[i-1], m[i], m[i+1]
        m_ll, m_l, m_r, m_rr = m[:, :-3], m[:, 1:-2], m[:, 2:-1], m[:, 3:]
        w_left = np.abs(m_rr - m_r)
        w_right = np.abs(m_l - m_ll)
        denom = w_left + w_right
        flat = denom == 0.0
        safe = np.where(flat, 1.0, denom)
        weighted = (w_left * m_l + w_right * m_r) / safe
        s[:, 2 : M - 2] = np.where(flat, 0.5 * (m_l + m_r), weighted)
    return s


def akima_coefficients(
    waypoints: FloatArray, slopes: FloatArray, knots: KnotSequence
) -> AkimaCoefficients:
    waypoints = np.asarray(waypoints, dtype=np.float64)
    slopes = np.asarray(slopes, dtype=np.float64)
    if slopes.shape != waypoints.shape:
        raise ValueError(f"slopes {slopes.shape} do not match waypoints {waypoints.shape}")
    h = np.diff(knots.knots)[None, :, None]
    m = _segment_slopes(waypoints, knots)
    s_i, s_next = slopes[:, :-1], slopes[:, 1:]
    a = waypoints[:, :-1]
    b = s_i
    c = (3.0 * m - 2.0 * s_i - s_next) / h
    d = (s_i + s_next - 2.0 * m) / h**2
    return AkimaCoefficients(coeffs=np.stack([a, b, c, d], axis=2), knots=knots)


def akima_evaluate_at(coeffs: AkimaCoefficients, times: FloatArray) -> FloatArray:
    """Evaluate the piecewise cubic at arbitrary times, shape ``(B, len(times), n)``."""
    k = coeffs.knots.knots
    times = np.asarray(times, dtype=np.float64)
    n_seg = coeffs.coeffs.shape[1]
    seg = np.clip(np.searchsorted(k, times, side="right") - 1, 0, n_seg - 1)
    tau = (times - k[seg])[None, :, None]
    c = coeffs.coeffs[:, seg]  # (B, len(times), 4, n)
    return c[:, :, 0] + tau * (c[:, :, 1] + tau * (c[:, :, 2] + tau * c[:, :, 3]))


def akima_evaluate(coeffs: AkimaCoefficients, T: int) -> FloatArray:
    return akima_evaluate_at(coeffs, eval_times(T))


def akima_interpolate(waypoints: FloatArray, T: int) -> FloatArray:
    waypoints = np.asarray(waypoints, dtype=np.float64)
    knots = KnotSequence.layers(waypoints.shape[1])
    slopes = akima_slopes(waypoints, knots)
    return akima_evaluate(akima_coefficients(waypoints, slopes, knots), T)


def linear_interpolate(waypoints: FloatArray, T: int) -> FloatArray:
    """Straight segments with ``H = T // M`` points each; the tail holds the last waypoint."""
    waypoints = np.asarray(waypoints, dtype=np.float64)
    B, M, n = waypoints.shape
    if M < 2:
        raise ValueError(f"linear interpolation needs M >= 2, got {M}")
    if T < M:
        raise ValueError(f"horizon T={T} is shorter than M={M} layers")
    H = T // M
    frac = np.arange(H, dtype=np.float64) / H
    start = waypoints[:, :-1, None, :]
    step = np.diff(waypoints, axis=1)[:, :, None, :]
    segments = (start + step * frac[None, None, :, None]).reshape(B, (M - 1) * H, n)
    hold = np.repeat(waypoints[:, -1:, :], T - (M - 1) * H, axis=1)
    return np.concatenate([segments, hold], axis=1)
