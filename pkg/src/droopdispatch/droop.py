"""P-f droop curves F_i = m * gamma_i^{-1} built from (suboptimal) solution functions."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .curves import CurveError, MonotoneCurve, invert_curve
from .tables import write_table


@dataclass(frozen=True)
class DroopConfig:
    """Nominal frequency, deviation budget (Hz) and the gain m (Hz/kW).

    ``m`` is left as None until :func:`build_droop` derives it.
    """

    f_star: float = 50.0
    delta_f_max: float = 0.5
    m: Optional[float] = None

    def __post_init__(self):
        if not self.delta_f_max > 0:
            raise ValueError(f"delta_f_max must be positive, got {self.delta_f_max}")
        if self.m is not None and not self.m > 0:
            raise ValueError(f"gain m must be positive, got {self.m}")


@dataclass(frozen=True)
class DroopCurve:
    """Frequency drop F_i(P_i) in Hz as a function of the DG's own output in kW."""

    dg_id: int
    curve: MonotoneCurve

    @property
    def p_domain(self) -> tuple[float, float]:
        return self.curve.domain

    def __call__(self, p):
        return self.curve(p)

    def power_at(self, drop, clip: bool = True):
        """Output the DG settles to when the common droop value is ``drop``."""
        return self.curve.inverse(drop, clip=clip)

    def to_csv(self, path) -> None:
        write_table(path, ["P_i[kW]", "F_i[Hz]"], np.column_stack([self.curve.knots_x, self.curve.knots_y]))


def build_droop(
    curves: Sequence[MonotoneCurve],
    cfg: DroopConfig,
    p_l_max: float,
    ids: Optional[Sequence[int]] = None,
) -> tuple[DroopConfig, list[DroopCurve]]:
    """Droop curves for load-share curves gamma_i(P_L).

    The gain is m = delta_f_max / p_l_max, so the synchronized drop m * P_L
    stays inside the budget over the whole load range.
    """
    if ids is None:
        ids = range(1, len(curves) + 1)
    m = cfg.delta_f_max / p_l_max
    out = []
    for dg_id, gamma in zip(ids, curves):
        if gamma.domain[0] != 0.0 or gamma.range[0] != 0.0:
            raise CurveError(f"DG {dg_id}: share curve must start at (0, 0), got {gamma.knots_x[0]}, {gamma.knots_y[0]}")
        if abs(gamma.domain[1] - p_l_max) > 1e-9 * max(1.0, p_l_max):
            raise CurveError(f"DG {dg_id}: share curve ends at {gamma.domain[1]}, expected p_l_max={p_l_max}")
        out.append(DroopCurve(dg_id, invert_curve(gamma).scaled(m)))
    return dataclasses.replace(cfg, m=m), out


def eval_frequency(dc: DroopCurve, cfg: DroopConfig, p: float) -> float:
    lo, hi = dc.p_domain
    if not (lo - 1e-12 <= p <= hi + 1e-12 * max(1.0, hi)):
        raise CurveError(f"DG {dc.dg_id}: power {p!r} kW outside droop domain [{lo}, {hi}]")
    return cfg.f_star - float(dc.curve(p, clip=True))
