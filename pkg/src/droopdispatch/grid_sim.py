"""Steady state and load-step transients of droop-controlled DGs.

At steady state every DG sees the same frequency, so all droop values are
equal (F_i(P_i) = lambda) and the outputs cover the load.  The common value
is found by bisection on Phi(lambda) = sum_i F_i^{-1}(lambda), which is
continuous and strictly increasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cost_model import Fleet, total_cost
from .droop import DroopConfig, DroopCurve
from .oracle import DispatchTable, InfeasibleError, OracleConfig, solve_dispatch
from .tables import fmt, write_table


class InstabilityError(RuntimeError):
    """The transient integration left the admissible state range."""


@dataclass(frozen=True)
class SteadyState:
    load: float
    powers: tuple[float, ...]
    frequency: float
    droop_value: float
    achieved_cost: float = math.nan
    optimal_cost: float = math.nan
    optimal_powers: tuple[float, ...] = ()

    @property
    def gap_rel(self) -> float:
        return (self.achieved_cost - self.optimal_cost) / max(1.0, self.optimal_cost)


def _phi(droops: Sequence[DroopCurve], drop: float) -> float:
    return math.fsum(float(dc.power_at(drop)) for dc in droops)


def solve_steady_state(
    droops: Sequence[DroopCurve],
    cfg: DroopConfig,
    p_l: float,
    fleet: Optional[Fleet] = None,
    oracle_cfg: OracleConfig = OracleConfig(),
    table: Optional[DispatchTable] = None,
) -> SteadyState:
    """Equilibrium of the droop-controlled fleet at load ``p_l``.

    With a ``fleet`` the achieved cost and the oracle optimum are filled in.
    """
    lam_hi = max(float(dc.curve.range[1]) for dc in droops)
    top = _phi(droops, lam_hi)
    if not (0.0 <= p_l <= top + 1e-9 * max(1.0, top)):
        raise InfeasibleError(f"load {p_l!r} kW outside droop capacity [0, {top}]")
    tol = 1e-9 * max(1.0, p_l)
    lo, hi = 0.0, lam_hi
    lam = 0.0 if p_l == 0.0 else 0.5 * (lo + hi)
    for _ in range(200):
        if p_l == 0.0:
            break
        lam = 0.5 * (lo + hi)
        resid = _phi(droops, lam) - p_l
        if abs(resid) <= tol:
            break
        if resid < 0:
            lo = lam
        else:
            hi = lam
        if hi - lo <= 1e-15 * max(1.0, lam_hi):
            break
    powers = tuple(float(dc.power_at(lam)) for dc in droops)
    state = SteadyState(p_l, powers, cfg.f_star - lam, lam)
    if fleet is None:
        return state
    opt = solve_dispatch(fleet, p_l, oracle_cfg, table=table)
    return SteadyState(
        p_l, powers, cfg.f_star - lam, lam,
        achieved_cost=total_cost(fleet, powers),
        optimal_cost=opt.cost,
        optimal_powers=opt.powers,
    )


@dataclass(frozen=True)
class SimParams:
    """Transient settings.

    ``kappa_f`` (1/s) pulls each DG's droop value toward the fleet mean;
    ``kappa_e`` (1/s) closes the power imbalance.  ``settle`` is the plateau
    length used by :func:`step_profile`.
    """

    kappa_f: float = 5.0
    kappa_e: float = 5.0
    dt: float = 1e-3
    settle: float = 3.0
    record_every: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.kappa_f < 0 or self.kappa_e <= 0:
            raise ValueError("kappa_f must be >= 0 and kappa_e > 0")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    powers: np.ndarray  # (T, n) kW
    frequencies: np.ndarray  # (T, n) Hz
    loads: np.ndarray  # (T,) kW
    ids: tuple[int, ...]

    def at(self, t: float) -> int:
        """Index of the last sample at or before ``t``."""
        return int(np.searchsorted(self.times, t + 1e-12, side="right") - 1)

    def to_csv(self, path) -> None:
        header = (
            ["t[s]"]
            + [f"P_{i}[kW]" for i in self.ids]
            + [f"f_{i}[Hz]" for i in self.ids]
            + ["P_L[kW]"]
        )
        write_table(path, header, np.column_stack([self.times, self.powers, self.frequencies, self.loads]))


def step_profile(loads: Sequence[float], settle: float) -> list[tuple[float, float]]:
    """Piecewise-constant profile holding each load for ``settle`` seconds."""
    return [(k * settle, float(p)) for k, p in enumerate(loads)]


def _load_at(profile, t):
    value = profile[0][1]
    for t0, p in profile:
        if t0 <= t + 1e-12:
            value = p
    return value


def simulate_transient(
    droops: Sequence[DroopCurve],
    cfg: DroopConfig,
    load_profile: Sequence[tuple[float, float]],
    dyn: SimParams = SimParams(),
    t_end: Optional[float] = None,
    initial: Optional[Sequence[float]] = None,
) -> Trajectory:
    """Fixed-step explicit Euler integration of the synchronization dynamics.

    Each DG's state is its droop value expressed as a virtual load
    ``u_i = F_i(P_i) / m``; its output is ``P_i = F_i^{-1}(m u_i)`` and its
    frequency ``f* - m u_i``.  The states evolve as

        du_i/dt = -kappa_f (u_i - mean(u)) + kappa_e (P_L(t) - sum_j P_j)

    Rest points have equal droop values and balanced power, i.e. exactly the
    steady state.  In output coordinates this is dP_i/dt = k_i (f_i - f_bar)
    + ... with the gain scaled by the local droop compliance dP_i/dF_i,
    which keeps near-vertical droop segments from making the system stiff.

    ``load_profile`` is a list of ``(start_time, load)`` pairs.  The run
    starts at the equilibrium of the first load unless ``initial`` powers
    are given.
    """
    m = cfg.m
    if m is None:
        raise ValueError("droop config has no gain; build it with build_droop")
    profile = sorted((float(t), float(p)) for t, p in load_profile)
    if t_end is None:
        t_end = profile[-1][0] + dyn.settle
    u_max = max(float(dc.curve.range[1]) for dc in droops) / m
    n = len(droops)
    knots = [(dc.curve.knots_y, dc.curve.knots_x) for dc in droops]

    if initial is None:
        ss = solve_steady_state(droops, cfg, profile[0][1])
        u = np.full(n, ss.droop_value / m)
    else:
        u = np.array([float(dc.curve(p, clip=True)) / m for dc, p in zip(droops, initial)])

    steps = int(round(t_end / dyn.dt))
    n_rec = steps // dyn.record_every + 1 + (1 if steps % dyn.record_every else 0)
    times = np.empty(n_rec)
    powers = np.empty((n_rec, n))
    freqs = np.empty((n_rec, n))
    loads = np.empty(n_rec)

    def outputs(u):
        uc = np.clip(u, 0.0, u_max)
        # np.interp clamps at the ends, matching the saturation of each droop
        return np.array([np.interp(m * ui, fy, fx) for (fy, fx), ui in zip(knots, uc)]), uc

    rec = 0
    for k in range(steps + 1):
        t = k * dyn.dt
        p_l = _load_at(profile, t)
        p, uc = outputs(u)
        if k % dyn.record_every == 0 or k == steps:
            times[rec] = t
            powers[rec] = p
            freqs[rec] = cfg.f_star - m * uc
            loads[rec] = p_l
            rec += 1
        if k == steps:
            break
        du = -dyn.kappa_f * (u - u.mean()) + dyn.kappa_e * (p_l - math.fsum(p))
        u = u + dyn.dt * du
        if not np.all(np.isfinite(u)) or np.any(u < -0.1 * u_max) or np.any(u > 1.1 * u_max):
            raise InstabilityError(
                f"state left the droop range at t={t:.4g}s "
                f"(kappa_f={dyn.kappa_f}, kappa_e={dyn.kappa_e}, dt={dyn.dt})"
            )
    ids = tuple(dc.dg_id for dc in droops)
    return Trajectory(times[:rec], powers[:rec], freqs[:rec], loads[:rec], ids)


@dataclass(frozen=True)
class ReportRow:
    load: float
    oracle_powers: tuple[float, ...]
    oracle_cost: float
    droop_powers: tuple[float, ...]
    droop_cost: float
    gap_rel: float
    frequency: float
    optimal: bool


def report_scenario(
    fleet: Fleet,
    droops: Sequence[DroopCurve],
    cfg: DroopConfig,
    loads: Sequence[float],
    oracle_cfg: OracleConfig = OracleConfig(),
    optimal_tol: float = 1e-4,
) -> list[ReportRow]:
    """Droop operating point vs. global optimum for each load."""
    table = DispatchTable(fleet, oracle_cfg.grid_step)
    rows = []
    for p_l in loads:
        ss = solve_steady_state(droops, cfg, float(p_l), fleet, oracle_cfg, table)
        rows.append(
            ReportRow(
                ss.load, ss.optimal_powers, ss.optimal_cost, ss.powers, ss.achieved_cost,
                ss.gap_rel, ss.frequency, ss.gap_rel <= optimal_tol,
            )
        )
    return rows


def format_report(rows: Sequence[ReportRow], ids: Sequence[int]) -> str:
    header = (
        ["P_L[kW]"]
        + [f"opt_P_{i}[kW]" for i in ids]
        + ["opt_cost[cost/h]"]
        + [f"droop_P_{i}[kW]" for i in ids]
        + ["droop_cost[cost/h]", "gap_rel", "f[Hz]", "optimal"]
    )
    lines = [",".join(header)]
    for r in rows:
        vals = [r.load, *r.oracle_powers, r.oracle_cost, *r.droop_powers, r.droop_cost, r.gap_rel, r.frequency]
        lines.append(",".join(fmt(v) for v in vals) + f",{r.optimal}")
    return "\n".join(lines) + "\n"
