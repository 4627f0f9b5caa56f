"""Decentralized economic dispatch through P-f droop curves.

Decides whether a microgrid's optimal dispatch can be reproduced by
independent droop controllers, builds the optimal (or best monotone
surrogate) droop curves, and checks the result against a global oracle.
"""

from .cost_model import DgSpec, DomainError, Fleet, eval_cost, eval_marginal_cost, total_cost
from .curves import MonotoneCurve, invert_curve
from .droop import DroopConfig, DroopCurve, build_droop, eval_frequency
from .estimator import DroopDispatch
from .grid_sim import (
    InstabilityError,
    SimParams,
    SteadyState,
    Trajectory,
    report_scenario,
    simulate_transient,
    solve_steady_state,
)
from .oracle import (
    Allocation,
    InfeasibleError,
    OracleConfig,
    dual_multiplier,
    exhaustive_oracle,
    solve_dispatch,
)
from .osf import CriterionReport, OsfTable, check_monotonicity, sweep_osf, verify_sum
from .scenarios import Scenario, ScenarioError, dump_scenario, load_scenario
from .sosf import ConvergenceError, FitSpec, SosfFit, fit_sosf, qp_solve
from .cli import run_pipeline

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "ConvergenceError",
    "CriterionReport",
    "DgSpec",
    "DomainError",
    "DroopConfig",
    "DroopCurve",
    "DroopDispatch",
    "FitSpec",
    "Fleet",
    "InfeasibleError",
    "InstabilityError",
    "MonotoneCurve",
    "OracleConfig",
    "OsfTable",
    "Scenario",
    "ScenarioError",
    "SimParams",
    "SosfFit",
    "SteadyState",
    "Trajectory",
    "build_droop",
    "check_monotonicity",
    "dump_scenario",
    "dual_multiplier",
    "eval_cost",
    "eval_frequency",
    "eval_marginal_cost",
    "exhaustive_oracle",
    "fit_sosf",
    "invert_curve",
    "load_scenario",
    "qp_solve",
    "report_scenario",
    "run_pipeline",
    "simulate_transient",
    "solve_dispatch",
    "solve_steady_state",
    "sweep_osf",
    "total_cost",
    "verify_sum",
]
