"""Scikit-learn style front end for the whole design pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .cost_model import total_cost
from .droop import DroopConfig, build_droop
from .grid_sim import solve_steady_state
from .oracle import DispatchTable, OracleConfig, solve_dispatch
from .osf import check_monotonicity, sweep_osf
from .sosf import FitSpec, fit_sosf
from .validation import check_fleet_array, check_loads


class DroopDispatch(BaseEstimator):
    """Design droop curves for a DG fleet and predict its operating points.

    ``fit`` takes the fleet as an (n_dg, 6) array of full-value
    ``[a, b, c, d, e, p_max]`` rows, sweeps the optimal dispatch, checks
    monotonicity, fits surrogates where needed and builds the droops.
    ``predict`` maps loads to the steady-state outputs, shape (n_loads, n_dg).

    Fitted attributes: ``fleet_``, ``osf_table_``, ``criterion_``, ``sosf_``,
    ``droop_config_``, ``droop_curves_``, ``perturbation_``.
    """

    def __init__(
        self,
        p_l_max=None,
        grid_points=361,
        grid_step=0.01,
        slope_tol=1e-4,
        epsilon=0.02,
        widen="low",
        f_star=50.0,
        delta_f_max=0.5,
        eps_inv=1e-6,
    ):
        self.p_l_max = p_l_max
        self.grid_points = grid_points
        self.grid_step = grid_step
        self.slope_tol = slope_tol
        self.epsilon = epsilon
        self.widen = widen
        self.f_star = f_star
        self.delta_f_max = delta_f_max
        self.eps_inv = eps_inv

    def _oracle_cfg(self) -> OracleConfig:
        return OracleConfig(grid_step=self.grid_step)

    def fit(self, X, y=None):
        fleet = check_fleet_array(X, self.p_l_max)
        cfg = self._oracle_cfg()
        self.fleet_ = fleet
        self.n_features_in_ = 6
        self.osf_table_ = sweep_osf(fleet, int(self.grid_points), cfg)
        self.criterion_ = check_monotonicity(self.osf_table_, self.slope_tol)
        self.sosf_ = fit_sosf(self.osf_table_, self.criterion_, FitSpec(epsilon=self.epsilon, widen=self.widen))
        curves, self.perturbation_ = self.sosf_.curves(self.eps_inv)
        self.droop_config_, self.droop_curves_ = build_droop(
            curves, DroopConfig(self.f_star, self.delta_f_max), fleet.p_l_max, fleet.ids
        )
        return self

    def _states(self, loads):
        check_is_fitted(self, "droop_curves_")
        loads = check_loads(loads, self.fleet_.p_l_max)
        return [solve_steady_state(self.droop_curves_, self.droop_config_, float(p)) for p in loads]

    def predict(self, loads) -> np.ndarray:
        return np.array([s.powers for s in self._states(loads)])

    def frequency(self, loads) -> np.ndarray:
        """Common steady-state frequency in Hz."""
        return np.array([s.frequency for s in self._states(loads)])

    def cost_gap(self, loads) -> np.ndarray:
        """Relative cost excess of the droop operating point over the optimum."""
        states = self._states(loads)
        table = DispatchTable(self.fleet_, self.grid_step)
        cfg = self._oracle_cfg()
        out = []
        for s in states:
            opt = solve_dispatch(self.fleet_, s.load, cfg, table=table)
            out.append((total_cost(self.fleet_, s.powers) - opt.cost) / max(1.0, opt.cost))
        return np.array(out)

    def score(self, loads, y=None) -> float:
        """Negative mean relative cost gap (higher is better, 0 is optimal)."""
        return -float(np.mean(self.cost_gap(loads)))
