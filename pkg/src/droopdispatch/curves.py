"""Strictly increasing piecewise-linear curves with exact inversion."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class CurveError(ValueError):
    """Curve knots break the strictly-increasing invariant or a domain bound."""


@dataclass(frozen=True, eq=False)
class MonotoneCurve:
    """Continuous piecewise-linear function through ``(knots_x, knots_y)``.

    Every segment slope is at least ``eps_min > 0``, so the curve is
    invertible and :func:`invert_curve` is exact (the knots are swapped).
    """

    knots_x: np.ndarray
    knots_y: np.ndarray
    eps_min: float = field(default=1e-12)

    def __post_init__(self):
        x = np.array(self.knots_x, dtype=float)
        y = np.array(self.knots_y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or len(x) < 2:
            raise CurveError("need two or more knots with matching 1-D x and y")
        if not self.eps_min > 0:
            raise CurveError(f"eps_min must be positive, got {self.eps_min}")
        dx = np.diff(x)
        if np.any(dx <= 0):
            raise CurveError("knots_x must be strictly increasing")
        slopes = np.diff(y) / dx
        bad = np.flatnonzero(slopes < self.eps_min)
        if len(bad):
            k = int(bad[0])
            raise CurveError(
                f"segment [{x[k]!r}, {x[k + 1]!r}] has slope {slopes[k]!r} < eps_min {self.eps_min!r}"
            )
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "knots_x", x)
        object.__setattr__(self, "knots_y", y)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots_x[0]), float(self.knots_x[-1])

    @property
    def range(self) -> tuple[float, float]:
        return float(self.knots_y[0]), float(self.knots_y[-1])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.knots_y) / np.diff(self.knots_x)

    def __call__(self, x, clip: bool = False):
        xs = np.asarray(x, dtype=float)
        lo, hi = self.domain
        span = hi - lo
        if clip:
            xs = np.clip(xs, lo, hi)
        elif np.any(xs < lo - 1e-12 * span) or np.any(xs > hi + 1e-12 * span):
            raise CurveError(f"argument outside curve domain [{lo!r}, {hi!r}]")
        out = np.interp(xs, self.knots_x, self.knots_y)
        return float(out) if out.ndim == 0 else out

    def inverse(self, y, clip: bool = False):
        inv = self.__dict__.get("_inverse")
        if inv is None:
            inv = invert_curve(self)
            object.__setattr__(self, "_inverse", inv)
        return inv(y, clip=clip)

    def scaled(self, factor: float) -> "MonotoneCurve":
        """Same curve with the output multiplied by ``factor > 0``."""
        return MonotoneCurve(self.knots_x, self.knots_y * factor, self.eps_min * factor)


def invert_curve(c: MonotoneCurve) -> MonotoneCurve:
    slopes = c.slopes
    if np.any(slopes < c.eps_min):
        raise CurveError("cannot invert: curve is not strictly increasing")
    # inverse slopes are 1/slope; the smallest is 1/max slope
    return MonotoneCurve(c.knots_y, c.knots_x, eps_min=float(1.0 / slopes.max()) * (1 - 1e-12))


def regularize_columns(
    loads: np.ndarray, values: np.ndarray, eps_inv: float = 1e-6
) -> tuple[np.ndarray, float]:
    """Blend sampled load-share columns toward proportional sharing.

    ``values`` has one row per DG and one column per load node, with the rows
    summing to ``loads``.  Zero-slope stretches (a DG parked at 0 or at its
    limit) make the inverse undefined, so every row is replaced by

        (1 - delta) * values + delta * (values[:, -1] / loads[-1]) * loads

    with the smallest common ``delta`` that lifts every slope to at least
    ``eps_inv``.  Both end values and the row sum are preserved exactly (up
    to rounding).  Returns the new array and the largest absolute change.
    Curves that are already strictly increasing come back untouched.
    """
    loads = np.asarray(loads, dtype=float)
    values = np.asarray(values, dtype=float)
    dx = np.diff(loads)
    slopes = np.diff(values, axis=1) / dx
    if slopes.min() >= eps_inv:
        return values.copy(), 0.0
    if slopes.min() < -1e-9:
        raise CurveError("cannot regularize a decreasing column; fit it first")
    share = values[:, -1] / loads[-1]
    if np.any(share <= eps_inv):
        idle = np.flatnonzero(share <= eps_inv).tolist()
        raise CurveError(f"rows {idle} never carry load, so their droop cannot be inverted")
    # slope after blending: (1 - delta) * s + delta * share >= eps_inv
    # only shallow segments constrain delta; steeper ones stay above eps_inv
    shallow = slopes < eps_inv
    need = np.where(shallow, (eps_inv - slopes) / np.where(shallow, share[:, None] - slopes, 1.0), 0.0)
    delta = min(float(need.max()) * (1 + 1e-9), 1.0)
    out = (1.0 - delta) * values + delta * share[:, None] * loads[None, :]
    out[:, -1] = values[:, -1]
    return out, float(np.abs(out - values).max())
