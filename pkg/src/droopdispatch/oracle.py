"""Global economic-dispatch oracle for nonconvex generator costs.

The dispatch problem

    min  sum_i C_i(P_i)   s.t.  sum_i P_i = P_L,  0 <= P_i <= P_i,max

is solved by dynamic programming over cumulative power on a uniform grid:
DGs 1..n-1 take grid values and the last DG takes the exact remainder, so
the equality constraint holds for any (off-grid) load.  The grid optimum is
then polished in the continuous domain by pairwise power transfers, which
needs no convexity assumption.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .cost_model import Fleet, eval_cost, eval_marginal_cost, total_cost


class InfeasibleError(ValueError):
    """Requested load cannot be served within the generator limits."""


# candidates whose DP value is within this of the minimum count as ties
TIE_TOL = 1e-12


@dataclass(frozen=True)
class OracleConfig:
    grid_step: float = 0.01
    refine: bool = True
    refine_tol: float = 1e-6

    def __post_init__(self):
        if not self.grid_step > 0:
            raise ValueError(f"grid_step must be positive, got {self.grid_step}")
        if not 0 < self.refine_tol < self.grid_step:
            raise ValueError(
                f"refine_tol={self.refine_tol} must lie in (0, grid_step={self.grid_step})"
            )


@dataclass(frozen=True)
class Allocation:
    powers: tuple[float, ...]
    cost: float
    load: float

    def __post_init__(self):
        object.__setattr__(self, "powers", tuple(float(p) for p in self.powers))

    def as_array(self) -> np.ndarray:
        return np.array(self.powers)


def _check_load(fleet: Fleet, p_l: float) -> None:
    if not (0.0 <= p_l <= fleet.capacity + 1e-9):
        raise InfeasibleError(f"load {p_l!r} kW outside [0, {fleet.capacity}]")


class DispatchTable:
    """Reusable DP tables for one fleet and grid step.

    ``tail[k][s]`` is the cheapest cost of DGs k..n-2 (zero-based) producing
    exactly ``s`` grid units; building them is the expensive part, so a load
    sweep builds them once and solves every load against the same tables.
    """

    def __init__(self, fleet: Fleet, grid_step: float):
        self.fleet = fleet
        self.step = grid_step
        dgs = fleet.dgs
        # grid units available to each gridded DG (all but the last)
        self.units = [int(math.floor(dg.p_max / grid_step + 1e-9)) for dg in dgs[:-1]]
        self.stage_cost = [
            dg.cost_array(np.arange(j + 1) * grid_step) for dg, j in zip(dgs[:-1], self.units)
        ]
        tail: list[np.ndarray] = [np.zeros(1)] * len(self.units) + [np.zeros(1)]
        for k in range(len(self.units) - 1, -1, -1):
            nxt = tail[k + 1]
            c = self.stage_cost[k]
            out = np.full(len(nxt) + len(c) - 1, np.inf)
            for j, cj in enumerate(c):
                seg = out[j : j + len(nxt)]
                np.minimum(seg, nxt + cj, out=seg)
            tail[k] = out
        self.tail = tail

    def solve(self, p_l: float, warm: Optional[Sequence[float]] = None) -> np.ndarray:
        """Grid-optimal powers for one load (before continuous refinement)."""
        fleet, step = self.fleet, self.step
        _check_load(fleet, p_l)
        last = fleet.dgs[-1]
        if fleet.n == 1:
            return np.array([min(max(p_l, 0.0), last.p_max)])

        head = self.tail[0]
        s_lo = max(0, int(math.ceil((p_l - last.p_max) / step - 1e-9)))
        s_hi = min(len(head) - 1, int(math.floor(p_l / step + 1e-9)))
        if s_lo > s_hi:
            raise InfeasibleError(f"load {p_l!r} kW not reachable on a {step} kW grid")
        s_range = np.arange(s_lo, s_hi + 1)
        p_last = np.clip(p_l - s_range * step, 0.0, last.p_max)
        vals = head[s_range] + last.cost_array(p_last)
        s = int(s_range[self._pick(vals, p_last, None if warm is None else warm[-1])])

        units = []
        for k, c in enumerate(self.stage_cost):
            nxt = self.tail[k + 1]
            j_lo = max(0, s - (len(nxt) - 1))
            j_hi = min(len(c) - 1, s)
            j = np.arange(j_lo, j_hi + 1)
            cand = c[j] + nxt[s - j]
            pick = j[self._pick(cand, j * step, None if warm is None else warm[k])]
            units.append(int(pick))
            s -= int(pick)

        powers = np.array(units, dtype=float) * step
        # the last DG absorbs the exact remainder so the balance is exact
        rest = p_l - math.fsum(powers)
        # snap rounding crumbs so a parked DG reads exactly 0 or p_max
        crumb = 1e-12 * max(1.0, p_l)
        if rest < crumb:
            rest = 0.0
        elif rest > last.p_max - crumb:
            rest = last.p_max
        return np.append(powers, rest)

    @staticmethod
    def _pick(values: np.ndarray, powers: np.ndarray, target: Optional[float]) -> int:
        best = values.min()
        ties = np.flatnonzero(values <= best + TIE_TOL * max(1.0, abs(best)))
        if target is None or len(ties) == 1:
            return int(ties[0])
        return int(ties[np.argmin(np.abs(powers[ties] - target))])


def refine_allocation(fleet: Fleet, powers: np.ndarray, cfg: OracleConfig) -> np.ndarray:
    """Continuous polish by pairwise transfers; never increases cost.

    For a pair (i, j) moving ``t`` kW from j to i, the pair cost has slope
    ``C_i'(P_i + t) - C_j'(P_j - t)``.  Each pass visits every pair, ordered by
    marginal-cost spread, walks downhill to the first stationary point (or
    the edge of a two-cell window) and keeps the move only if the cost
    actually drops.  Stops when no transfer of at least ``refine_tol`` helps.
    """
    p = np.array(powers, dtype=float)
    dgs = fleet.dgs
    window = 2.0 * cfg.grid_step
    for _ in range(200):
        moved = False
        marg = [eval_marginal_cost(dg, pi) for dg, pi in zip(dgs, p)]
        pairs = sorted(
            itertools.combinations(range(fleet.n), 2),
            key=lambda ij: -abs(marg[ij[0]] - marg[ij[1]]),
        )
        for i, j in pairs:
            slope0 = eval_marginal_cost(dgs[i], p[i]) - eval_marginal_cost(dgs[j], p[j])
            if slope0 == 0.0:
                continue
            if slope0 > 0:
                # cheaper to move power the other way: swap roles
                i, j = j, i
            pi, pj = p[i], p[j]
            hi = min(dgs[i].p_max - pi, pj, window)
            if hi < cfg.refine_tol:
                continue

            def slope(t, pi=pi, pj=pj, i=i, j=j):
                return eval_marginal_cost(dgs[i], min(pi + t, dgs[i].p_max)) - eval_marginal_cost(
                    dgs[j], max(pj - t, 0.0)
                )

            if slope(hi) <= 0.0:
                t = hi
            else:
                t = brentq(slope, 0.0, hi, xtol=cfg.refine_tol * 1e-3)
            if t < cfg.refine_tol:
                continue
            new_i = min(pi + t, dgs[i].p_max)
            new_j = max(pj - t, 0.0)
            before = eval_cost(dgs[i], pi) + eval_cost(dgs[j], pj)
            after = eval_cost(dgs[i], new_i) + eval_cost(dgs[j], new_j)
            if after < before:
                p[i], p[j] = new_i, new_j
                moved = True
        if not moved:
            break
    return p


def _finish(fleet: Fleet, p_l: float, powers: np.ndarray, cfg: OracleConfig) -> Allocation:
    powers = np.clip(powers, 0.0, fleet.p_max)
    cost = total_cost(fleet, powers)
    if cfg.refine and fleet.n > 1:
        refined = refine_allocation(fleet, powers, cfg)
        refined_cost = total_cost(fleet, refined)
        if refined_cost <= cost:
            powers, cost = refined, refined_cost
    return Allocation(tuple(powers), cost, p_l)


def solve_dispatch(
    fleet: Fleet,
    p_l: float,
    cfg: OracleConfig = OracleConfig(),
    warm: Optional[Sequence[float]] = None,
    table: Optional[DispatchTable] = None,
) -> Allocation:
    """Global minimum of the dispatch problem for a single load level.

    ``warm`` (a previous allocation) only breaks exact DP ties; ``table``
    lets a sweep reuse precomputed DP tables.
    """
    _check_load(fleet, p_l)
    if table is None:
        table = DispatchTable(fleet, cfg.grid_step)
    return _finish(fleet, p_l, table.solve(p_l, warm), cfg)


def exhaustive_oracle(fleet: Fleet, p_l: float, step: float) -> Allocation:
    """Brute-force grid enumeration for n <= 3 (test-grade reference).

    All but one DG run over the full grid and the remaining one takes the
    exact remainder.  Every DG takes a turn as the remainder, so optima with
    one DG off the grid (typically pinned at a bound) are found too.
    """
    if fleet.n > 3:
        raise NotImplementedError(f"exhaustive oracle supports n <= 3, got {fleet.n}")
    if not step > 0:
        raise ValueError("step must be positive")
    _check_load(fleet, p_l)
    best: Optional[tuple[float, list[float]]] = None
    for r in range(fleet.n):
        found = _enumerate(fleet, p_l, step, r)
        if found is not None and (best is None or found[0] < best[0]):
            best = found
    if best is None:
        raise InfeasibleError(f"load {p_l!r} not reachable on the enumeration grid")
    return Allocation(tuple(best[1]), total_cost(fleet, best[1]), p_l)


def _enumerate(fleet: Fleet, p_l: float, step: float, r: int):
    gridded = [k for k in range(fleet.n) if k != r]
    axes = [np.arange(int(math.floor(fleet.dgs[k].p_max / step + 1e-9)) + 1) * step for k in gridded]
    flat = [g.ravel() for g in np.meshgrid(*axes, indexing="ij")] if axes else []
    rest = np.atleast_1d(p_l - (np.sum(flat, axis=0) if flat else 0.0))
    last = fleet.dgs[r]
    ok = (rest >= -1e-12) & (rest <= last.p_max + 1e-12)
    if not np.any(ok):
        return None
    rest = np.clip(rest, 0.0, last.p_max)
    cost = last.cost_array(rest)
    for k, g in zip(gridded, flat):
        cost = cost + fleet.dgs[k].cost_array(g)
    cost = np.where(ok, cost, np.inf)
    i = int(np.argmin(cost))
    powers = [0.0] * fleet.n
    for k, g in zip(gridded, flat):
        powers[k] = float(g[i])
    powers[r] = float(rest[i])
    return float(cost[i]), powers


def dual_multiplier(fleet: Fleet, alloc: Allocation, tol: float = 1e-4) -> Optional[float]:
    """Common marginal cost of the interior DGs, or None if they disagree.

    Diagnostic only: equal incremental cost is necessary at an interior
    optimum but says nothing about global optimality for nonconvex costs.
    """
    interior = [
        eval_marginal_cost(dg, p)
        for dg, p in zip(fleet.dgs, alloc.powers)
        if 0.0 < p < dg.p_max
    ]
    if not interior:
        return None
    if max(interior) - min(interior) > tol:
        return None
    return float(np.mean(interior))
