"""Command-line pipeline: sweep, criterion, fit, droop, simulate, report.

    droopdispatch <stage> --scenario <name|path> [--out DIR]
                  [--grid-points N] [--epsilon X] [--delta-f-max X]

Output files (all plain-text, one header line, 17 significant digits):

    scenario.ini       the resolved scenario, reloadable with --scenario
    oracle.csv         P_L, P_1..P_n, cost at each configured load step
    osf.csv            P_L, g_1..g_n, cost over the sweep grid
    criterion.txt      per-DG monotonicity verdict and violating intervals
    sosf.csv           P_L, gamma_1..gamma_n (equal to osf.csv if no DG is flagged)
    droop_<id>.csv     P_i, F_i knots of each droop curve
    trajectory.csv     t, P_1..P_n, f_1..f_n, P_L of the load-step transient
    report.txt         droop operating point vs. optimum per load step
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .droop import DroopConfig, DroopCurve, build_droop
from .grid_sim import Trajectory, format_report, report_scenario, simulate_transient, step_profile
from .oracle import DispatchTable, solve_dispatch
from .osf import CriterionReport, OsfTable, check_monotonicity, sweep_osf, verify_sum
from .scenarios import Scenario, ScenarioError, dump_scenario, load_scenario, with_overrides
from .sosf import SosfFit, fit_sosf
from .tables import fmt, write_table

STAGES = ("oracle", "osf", "criterion", "fit", "droop", "simulate", "report", "all")

# stages each target needs, in run order
PLAN = {
    "oracle": ["oracle"],
    "osf": ["osf"],
    "criterion": ["osf", "criterion"],
    "fit": ["osf", "criterion", "fit"],
    "droop": ["osf", "criterion", "fit", "droop"],
    "simulate": ["osf", "criterion", "fit", "droop", "simulate"],
    "report": ["osf", "criterion", "fit", "droop", "report"],
    "all": ["oracle", "osf", "criterion", "fit", "droop", "simulate", "report"],
}


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineResult:
    scenario: Scenario
    out_dir: Path
    files: list[Path] = field(default_factory=list)
    table: Optional[OsfTable] = None
    report: Optional[CriterionReport] = None
    fit: Optional[SosfFit] = None
    droop_config: Optional[DroopConfig] = None
    droops: list[DroopCurve] = field(default_factory=list)
    perturbation: float = 0.0
    trajectory: Optional[Trajectory] = None
    rows: list = field(default_factory=list)
    log: list[str] = field(default_factory=list)


def run_pipeline(scenario: Scenario, stage: str = "all", out_dir=None) -> PipelineResult:
    """Run ``stage`` and everything it depends on, writing files to ``out_dir``.

    Raises :class:`StageError` tagged with the failing stage.
    """
    if stage not in PLAN:
        raise ValueError(f"unknown stage {stage!r}; choose from {STAGES}")
    out = Path(out_dir or scenario.output_dir or f"out/{scenario.name}")
    out.mkdir(parents=True, exist_ok=True)
    res = PipelineResult(scenario, out)
    _write(res, "scenario.ini", lambda p: dump_scenario(scenario, p))
    for step in PLAN[stage]:
        t0 = time.perf_counter()
        try:
            STEPS[step](res)
        except Exception as exc:  # noqa: BLE001 - re-raised with the stage tag
            raise StageError(step, exc) from exc
        res.log.append(f"{step}: {time.perf_counter() - t0:.2f}s")
    return res


def _write(res: PipelineResult, name: str, writer) -> None:
    path = res.out_dir / name
    writer(path)
    res.files.append(path)


def _oracle(res: PipelineResult) -> None:
    sc = res.scenario
    table = DispatchTable(sc.fleet, sc.oracle.grid_step)
    rows = []
    for p_l in sc.load_steps:
        alloc = solve_dispatch(sc.fleet, p_l, sc.oracle, table=table)
        rows.append([p_l, *alloc.powers, alloc.cost])
    header = ["P_L[kW]"] + [f"P_{i}[kW]" for i in sc.fleet.ids] + ["cost[cost/h]"]
    _write(res, "oracle.csv", lambda p: write_table(p, header, rows))


def _osf(res: PipelineResult) -> None:
    sc = res.scenario
    res.table = sweep_osf(sc.fleet, sc.sweep_points, sc.oracle)
    resid = verify_sum(res.table)
    if resid > 1e-6 * max(1.0, sc.fleet.p_l_max):
        raise RuntimeError(f"sweep violates the sum identity by {resid!r} kW")
    _write(res, "osf.csv", res.table.to_csv)


def _criterion(res: PipelineResult) -> None:
    res.report = check_monotonicity(res.table, res.scenario.slope_tol)
    _write(res, "criterion.txt", lambda p: Path(p).write_text(res.report.to_text()))


def _fit(res: PipelineResult) -> None:
    res.fit = fit_sosf(res.table, res.report, res.scenario.fit)
    _write(res, "sosf.csv", res.fit.to_csv)


def _droop(res: PipelineResult) -> None:
    sc = res.scenario
    curves, res.perturbation = res.fit.curves(sc.eps_inv)
    res.droop_config, res.droops = build_droop(curves, sc.droop, sc.fleet.p_l_max, sc.fleet.ids)
    for dc in res.droops:
        _write(res, f"droop_{dc.dg_id}.csv", dc.to_csv)


def _simulate(res: PipelineResult) -> None:
    sc = res.scenario
    res.trajectory = simulate_transient(
        res.droops, res.droop_config, step_profile(sc.load_steps, sc.sim.settle), sc.sim
    )
    _write(res, "trajectory.csv", res.trajectory.to_csv)


def _report(res: PipelineResult) -> None:
    sc = res.scenario
    res.rows = report_scenario(sc.fleet, res.droops, res.droop_config, sc.load_steps, sc.oracle)
    _write(res, "report.txt", lambda p: Path(p).write_text(format_report(res.rows, sc.fleet.ids)))


STEPS = {
    "oracle": _oracle,
    "osf": _osf,
    "criterion": _criterion,
    "fit": _fit,
    "droop": _droop,
    "simulate": _simulate,
    "report": _report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="droopdispatch", description="Droop-based economic dispatch pipeline.")
    ap.add_argument("stage", choices=STAGES)
    ap.add_argument("--scenario", required=True, help="built-in name (case1, case2, case3) or config path")
    ap.add_argument("--out", default=None, help="output directory (default: out/<scenario name>)")
    ap.add_argument("--grid-points", type=int, default=None, help="load sweep points over [0, p_l_max]")
    ap.add_argument("--epsilon", type=float, default=None, help="minimum fitted slope")
    ap.add_argument("--delta-f-max", type=float, default=None, help="frequency deviation budget in Hz")
    return ap


def _summary(res: PipelineResult) -> list[str]:
    lines = []
    if res.report is not None:
        flagged = res.report.flagged
        lines.append(f"criterion_met = {str(res.report.criterion_met).lower()}" + (f" (flagged DGs {flagged})" if flagged else ""))
    if res.droop_config is not None:
        lines.append(f"m = {fmt(res.droop_config.m)} Hz/kW, regularization {res.perturbation:.3g} kW")
    for r in res.rows:
        lines.append(f"P_L = {r.load:g} kW: gap_rel = {r.gap_rel:.3g}, f = {r.frequency:.6f} Hz, optimal = {r.optimal}")
    lines.append("wrote " + ", ".join(p.name for p in res.files))
    return lines


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.scenario)
        sc = with_overrides(sc, args.grid_points, args.epsilon, args.delta_f_max)
    except (ScenarioError, ValueError) as exc:
        print(f"[scenario] {exc}", file=sys.stderr)
        return 2
    try:
        res = run_pipeline(sc, args.stage, args.out)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    print("\n".join(_summary(res)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
