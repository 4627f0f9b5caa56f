"""Optimal solution functions g_i(P_L) and the decentralized-optimality criterion.

Droop control can reproduce the optimal dispatch at every load if and only
if each DG's optimal output is a strictly increasing function of the total
load.  :func:`sweep_osf` samples those functions with the global oracle and
:func:`check_monotonicity` reports where they fail to increase.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cost_model import Fleet
from .oracle import DispatchTable, OracleConfig, solve_dispatch
from .tables import read_table, write_table

# a DG within this distance of 0 or p_max is treated as parked on the bound
BOUND_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class OsfTable:
    """Sampled optimal outputs; ``powers[k, i]`` is g_i at ``loads[k]``."""

    loads: np.ndarray
    powers: np.ndarray
    costs: np.ndarray
    ids: tuple[int, ...]
    p_max: np.ndarray

    def __post_init__(self):
        loads = np.asarray(self.loads, dtype=float)
        powers = np.asarray(self.powers, dtype=float)
        if powers.shape != (len(loads), len(self.ids)):
            raise ValueError(f"powers shape {powers.shape} != ({len(loads)}, {len(self.ids)})")
        if len(loads) < 2 or np.any(np.diff(loads) <= 0):
            raise ValueError("loads must be a strictly increasing grid of two or more points")
        object.__setattr__(self, "loads", loads)
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "costs", np.asarray(self.costs, dtype=float))
        object.__setattr__(self, "p_max", np.asarray(self.p_max, dtype=float))
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def n(self) -> int:
        return len(self.ids)

    def column(self, i: int) -> np.ndarray:
        return self.powers[:, i]

    def to_csv(self, path) -> None:
        header = ["P_L[kW]"] + [f"g_{i}[kW]" for i in self.ids] + ["cost[cost/h]"]
        rows = np.column_stack([self.loads, self.powers, self.costs])
        write_table(path, header, rows)

    @classmethod
    def from_csv(cls, path, p_max) -> "OsfTable":
        header, data = read_table(path)
        ids = tuple(int(h.split("_")[1].split("[")[0]) for h in header[1:-1])
        return cls(data[:, 0], data[:, 1:-1], data[:, -1], ids, np.asarray(p_max, dtype=float))


def sweep_osf(fleet: Fleet, grid_points: int, cfg: OracleConfig = OracleConfig()) -> OsfTable:
    """Solve the dispatch on a uniform load grid over [0, p_l_max].

    Rows are solved in order with the previous allocation as warm start, so
    exact ties resolve toward the branch already being followed.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    loads = np.linspace(0.0, fleet.p_l_max, grid_points)
    table = DispatchTable(fleet, cfg.grid_step)
    powers = np.empty((grid_points, fleet.n))
    costs = np.empty(grid_points)
    warm: Optional[tuple] = None
    for k, p_l in enumerate(loads):
        alloc = solve_dispatch(fleet, float(p_l), cfg, warm=warm, table=table)
        powers[k] = alloc.powers
        costs[k] = alloc.cost
        warm = alloc.powers
    return OsfTable(loads, powers, costs, tuple(fleet.ids), fleet.p_max)


def verify_sum(table: OsfTable) -> float:
    """Largest |sum_i g_i(P_L) - P_L| over the grid, in kW."""
    return float(np.max(np.abs(table.powers.sum(axis=1) - table.loads)))


@dataclass(frozen=True)
class Violation:
    """A load interval where one OSF fails to increase, with the matching output range."""

    load_lo: float
    load_hi: float
    power_lo: float
    power_hi: float


@dataclass(frozen=True)
class DgVerdict:
    dg_id: int
    monotone: bool
    violations: tuple[Violation, ...] = ()


@dataclass(frozen=True)
class CriterionReport:
    per_dg: tuple[DgVerdict, ...]
    slope_tol: float = 1e-4
    criterion_met: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "per_dg", tuple(self.per_dg))
        object.__setattr__(self, "criterion_met", all(v.monotone for v in self.per_dg))

    @property
    def flagged(self) -> list[int]:
        return [v.dg_id for v in self.per_dg if not v.monotone]

    def to_text(self) -> str:
        lines = [
            f"criterion_met={self.criterion_met}",
            f"slope_tol={self.slope_tol!r}",
            "dg,monotone,load_lo[kW],load_hi[kW],power_lo[kW],power_hi[kW]",
        ]
        for v in self.per_dg:
            if not v.violations:
                lines.append(f"{v.dg_id},{v.monotone},,,,")
            for w in v.violations:
                lines.append(
                    ",".join(
                        [str(v.dg_id), str(v.monotone)]
                        + [format(x, ".17g") for x in (w.load_lo, w.load_hi, w.power_lo, w.power_hi)]
                    )
                )
        return "\n".join(lines) + "\n"


def bad_segments(table: OsfTable, slope_tol: float = 1e-4) -> np.ndarray:
    """Boolean (segments, n) mask of grid cells where an OSF is not strictly increasing.

    A cell fails when the OSF rises by less than ``slope_tol`` per kW of load,
    unless the DG sits on the same bound (0 or p_max) at both ends: a parked
    DG is saturated, not competing.  A rise steeper than the load itself
    (slope above 1) also fails, because the outputs sum to the load and so
    some other DG must be dropping; it is how an upward jump of the optimum
    shows up on a grid.
    """
    g = table.powers
    dx = np.diff(table.loads)[:, None]
    dg = np.diff(g, axis=0)
    lo, hi = g[:-1], g[1:]
    at_zero = (lo <= BOUND_TOL) & (hi <= BOUND_TOL)
    at_max = (lo >= table.p_max - BOUND_TOL) & (hi >= table.p_max - BOUND_TOL)
    too_flat = (dg < slope_tol * dx) & ~(at_zero | at_max)
    too_steep = dg > (1.0 + slope_tol) * dx
    return too_flat | too_steep


def check_monotonicity(table: OsfTable, slope_tol: float = 1e-4) -> CriterionReport:
    """Per-DG verdict on strict monotonicity, with violation intervals.

    Each maximal run of failing cells is reported widened by one grid cell
    on each side; these intervals seed the suboptimal fit.
    """
    bad = bad_segments(table, slope_tol)
    x = table.loads
    last = len(x) - 1
    verdicts = []
    for i, dg_id in enumerate(table.ids):
        runs = _runs(bad[:, i])
        violations = []
        for start, stop in runs:
            # cells start..stop-1 fail: nodes start..stop, widened by one
            a = max(start - 1, 0)
            b = min(stop + 1, last)
            violations.append(
                Violation(float(x[a]), float(x[b]), float(table.powers[a, i]), float(table.powers[b, i]))
            )
        verdicts.append(DgVerdict(dg_id, not violations, tuple(_merge(violations))))
    return CriterionReport(tuple(verdicts), slope_tol)


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    runs = []
    k = 0
    while k < len(mask):
        if mask[k]:
            j = k
            while j < len(mask) and mask[j]:
                j += 1
            runs.append((k, j))
            k = j
        else:
            k += 1
    return runs


def _merge(violations: list[Violation]) -> list[Violation]:
    merged: list[Violation] = []
    for v in violations:
        if merged and v.load_lo <= merged[-1].load_hi:
            prev = merged.pop()
            v = Violation(prev.load_lo, v.load_hi, prev.power_lo, v.power_hi)
        merged.append(v)
    return merged
