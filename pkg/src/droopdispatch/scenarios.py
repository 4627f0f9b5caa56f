"""Scenario files and the three built-in test systems.

Config files are INI-style::

    [fleet]
    name = case1
    p_l_max = 36.0

    [dg.1]
    a = 0.0
    b = 0.004
    c = 0.004
    d = 0.003
    e = 0.286
    p_max = 10.0

    [loads]
    steps = 10.0, 15.0, 20.0

    [oracle]        grid_step, refine, refine_tol, sweep_points
    [fit]           epsilon, widen, max_iter, slope_tol
    [droop]         f_star, delta_f_max, eps_inv
    [sim]           kappa_f, kappa_e, dt, settle, record_every

Coefficients are stored at full value.  Every section except [fleet], one
[dg.N] and [loads] is optional and falls back to the defaults below.
Floats are written with ``repr`` so a dump/load round trip is bit-exact.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Optional

from .cost_model import DgSpec, Fleet
from .droop import DroopConfig
from .grid_sim import SimParams
from .oracle import OracleConfig
from .sosf import FitSpec


class ScenarioError(ValueError):
    """Unreadable or inconsistent scenario file."""


@dataclass(frozen=True)
class Scenario:
    name: str
    fleet: Fleet
    load_steps: tuple[float, ...]
    oracle: OracleConfig = OracleConfig()
    sweep_points: int = 361
    slope_tol: float = 1e-4
    fit: FitSpec = FitSpec()
    droop: DroopConfig = DroopConfig()
    eps_inv: float = 1e-6
    sim: SimParams = SimParams()
    output_dir: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "load_steps", tuple(float(p) for p in self.load_steps))
        for p in self.load_steps:
            if not 0.0 <= p <= self.fleet.p_l_max:
                raise ScenarioError(f"load step {p} kW outside [0, p_l_max={self.fleet.p_l_max}]")
        if self.sweep_points < 2:
            raise ScenarioError("sweep_points must be at least 2")


# coefficient table: a/b/c/d/e are listed in units of 1e-3/1e-3/1e-2/1e-3/1e-1
TABLE_SCALE = ("1e-3", "1e-3", "1e-2", "1e-3", "1e-1")

COEFF_TABLE = {
    "case1": [
        ("0", "4", "0.4", "3", "2.86", 10),
        ("0", "5.4", "0.4", "2", "2.86", 10),
        ("0", "3.3", "1.1", "1", "2.86", 8),
        ("0", "2.4", "0.8", "4", "2.86", 8),
    ],
    "case2": [
        ("0.4", "-5", "6", "0", "0", 10),
        ("0", "5.4", "0.4", "2", "2.86", 10),
        ("0", "3.3", "1.1", "1", "2.86", 8),
        ("0", "2.4", "0.8", "4", "2.86", 8),
    ],
    "case3": [
        ("0", "800", "4", "2", "28.6", 1),
        ("0", "240", "8", "2", "28.6", 1),
    ],
}

BUILTIN_LOADS = {
    "case1": (10.0, 15.0, 20.0),
    "case2": (10.0, 15.0, 20.0),
    "case3": (0.8, 1.2, 1.5),
}


def scale_row(row) -> tuple[float, ...]:
    """Coefficient table entries to full-value coefficients, scaled once in decimal."""
    return tuple(float(Decimal(v) * Decimal(s)) for v, s in zip(row[:5], TABLE_SCALE))


def builtin(name: str) -> Scenario:
    if name not in COEFF_TABLE:
        raise ScenarioError(f"unknown built-in scenario {name!r}; choose from {sorted(COEFF_TABLE)}")
    dgs = [DgSpec(k + 1, *scale_row(row), p_max=float(row[5])) for k, row in enumerate(COEFF_TABLE[name])]
    if name == "case3":
        fleet = Fleet(dgs, p_l_max=2.0)
        # 0.005 kW load spacing over [0, 2]; DP grid finer than the sweep
        return Scenario(name, fleet, BUILTIN_LOADS[name], OracleConfig(grid_step=0.001), sweep_points=401)
    fleet = Fleet(dgs, p_l_max=36.0)
    return Scenario(name, fleet, BUILTIN_LOADS[name])


def load_scenario(source: str) -> Scenario:
    """A built-in name (``case1``, ``case2``, ``case3``) or a path to a config file."""
    if source in COEFF_TABLE:
        return builtin(source)
    path = Path(source)
    if not path.exists():
        raise ScenarioError(f"{source!r} is neither a built-in scenario nor an existing file")
    parser = configparser.ConfigParser()
    try:
        parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return _from_parser(parser, str(path))


def _get(parser, section, key, kind, where, default=None):
    if not parser.has_section(section) or not parser.has_option(section, key):
        if default is not None:
            return default
        raise ScenarioError(f"{where}: missing [{section}] {key}")
    raw = parser.get(section, key)
    try:
        if kind is bool:
            return parser.getboolean(section, key)
        return kind(raw)
    except ValueError as exc:
        raise ScenarioError(f"{where}: [{section}] {key} = {raw!r}: {exc}") from exc


def _from_parser(parser: configparser.ConfigParser, where: str) -> Scenario:
    name = _get(parser, "fleet", "name", str, where)
    p_l_max = _get(parser, "fleet", "p_l_max", float, where)
    dg_sections = sorted(
        (s for s in parser.sections() if s.startswith("dg.")),
        key=lambda s: _dg_id(s, where),
    )
    if not dg_sections:
        raise ScenarioError(f"{where}: no [dg.N] sections")
    dgs = []
    for sec in dg_sections:
        coeffs = {k: _get(parser, sec, k, float, where) for k in ("a", "b", "c", "d", "e", "p_max")}
        try:
            dgs.append(DgSpec(_dg_id(sec, where), **coeffs))
        except ValueError as exc:
            raise ScenarioError(f"{where}: [{sec}] {exc}") from exc
    try:
        fleet = Fleet(dgs, p_l_max)
    except ValueError as exc:
        raise ScenarioError(f"{where}: [fleet] {exc}") from exc

    steps_raw = _get(parser, "loads", "steps", str, where)
    try:
        steps = tuple(float(v) for v in steps_raw.split(",") if v.strip())
    except ValueError as exc:
        raise ScenarioError(f"{where}: [loads] steps = {steps_raw!r}: {exc}") from exc

    d_or, d_fit, d_dr, d_sim = OracleConfig(), FitSpec(), DroopConfig(), SimParams()
    try:
        oracle = OracleConfig(
            grid_step=_get(parser, "oracle", "grid_step", float, where, d_or.grid_step),
            refine=_get(parser, "oracle", "refine", bool, where, d_or.refine),
            refine_tol=_get(parser, "oracle", "refine_tol", float, where, d_or.refine_tol),
        )
        fit = FitSpec(
            epsilon=_get(parser, "fit", "epsilon", float, where, d_fit.epsilon),
            widen=_get(parser, "fit", "widen", str, where, d_fit.widen),
            max_iter=_get(parser, "fit", "max_iter", int, where, d_fit.max_iter),
        )
        droop = DroopConfig(
            f_star=_get(parser, "droop", "f_star", float, where, d_dr.f_star),
            delta_f_max=_get(parser, "droop", "delta_f_max", float, where, d_dr.delta_f_max),
        )
        sim = SimParams(
            kappa_f=_get(parser, "sim", "kappa_f", float, where, d_sim.kappa_f),
            kappa_e=_get(parser, "sim", "kappa_e", float, where, d_sim.kappa_e),
            dt=_get(parser, "sim", "dt", float, where, d_sim.dt),
            settle=_get(parser, "sim", "settle", float, where, d_sim.settle),
            record_every=_get(parser, "sim", "record_every", int, where, d_sim.record_every),
        )
        return Scenario(
            name, fleet, steps, oracle,
            sweep_points=_get(parser, "oracle", "sweep_points", int, where, 361),
            slope_tol=_get(parser, "fit", "slope_tol", float, where, 1e-4),
            fit=fit, droop=droop,
            eps_inv=_get(parser, "droop", "eps_inv", float, where, 1e-6),
            sim=sim,
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


def _dg_id(section: str, where: str) -> int:
    try:
        return int(section.split(".", 1)[1])
    except ValueError:
        raise ScenarioError(f"{where}: section [{section}] must be [dg.<integer id>]") from None


def dump_scenario(sc: Scenario, path) -> None:
    r = repr
    lines = ["[fleet]", f"name = {sc.name}", f"p_l_max = {r(sc.fleet.p_l_max)}", ""]
    for dg in sc.fleet.dgs:
        lines.append(f"[dg.{dg.id}]")
        for k in ("a", "b", "c", "d", "e", "p_max"):
            lines.append(f"{k} = {r(getattr(dg, k))}")
        lines.append("")
    lines += ["[loads]", "steps = " + ", ".join(r(p) for p in sc.load_steps), ""]
    o, f, d, s = sc.oracle, sc.fit, sc.droop, sc.sim
    lines += [
        "[oracle]",
        f"grid_step = {r(o.grid_step)}",
        f"refine = {'true' if o.refine else 'false'}",
        f"refine_tol = {r(o.refine_tol)}",
        f"sweep_points = {sc.sweep_points}",
        "",
        "[fit]",
        f"epsilon = {r(f.epsilon)}",
        f"widen = {f.widen}",
        f"max_iter = {f.max_iter}",
        f"slope_tol = {r(sc.slope_tol)}",
        "",
        "[droop]",
        f"f_star = {r(d.f_star)}",
        f"delta_f_max = {r(d.delta_f_max)}",
        f"eps_inv = {r(sc.eps_inv)}",
        "",
        "[sim]",
        f"kappa_f = {r(s.kappa_f)}",
        f"kappa_e = {r(s.kappa_e)}",
        f"dt = {r(s.dt)}",
        f"settle = {r(s.settle)}",
        f"record_every = {s.record_every}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def with_overrides(sc: Scenario, grid_points=None, epsilon=None, delta_f_max=None) -> Scenario:
    changes = {}
    if grid_points is not None:
        changes["sweep_points"] = int(grid_points)
    if epsilon is not None:
        changes["fit"] = dataclasses.replace(sc.fit, epsilon=float(epsilon))
    if delta_f_max is not None:
        changes["droop"] = dataclasses.replace(sc.droop, delta_f_max=float(delta_f_max))
    return dataclasses.replace(sc, **changes) if changes else sc
