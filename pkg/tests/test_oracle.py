import math

import numpy as np
import pytest
from scipy.optimize import minimize

from droopdispatch.cost_model import DgSpec, Fleet, eval_marginal_cost, total_cost
from droopdispatch.oracle import (
    Allocation,
    DispatchTable,
    InfeasibleError,
    OracleConfig,
    dual_multiplier,
    exhaustive_oracle,
    solve_dispatch,
)
from droopdispatch.osf import sweep_osf
from droopdispatch.scenarios import builtin

QUAD = DgSpec(1, 0.0, 0.01, 0.1, 0.0, 0.0, 10.0)


def random_dg(rng, dg_id):
    """Coefficients in the magnitude ranges of the built-in fleets, convex or not."""
    return DgSpec(
        dg_id,
        a=rng.choice([0.0, rng.uniform(0.0, 5e-4)]),
        b=rng.uniform(-6e-3, 6e-3),
        c=rng.uniform(0.0, 0.07),
        d=rng.uniform(0.0, 4e-3),
        e=rng.choice([0.0, 0.286]),
        p_max=float(rng.choice([8.0, 10.0])),
    )


def test_single_dg_takes_the_load():
    fleet = Fleet([QUAD], 10.0)
    assert solve_dispatch(fleet, 7.0).powers == (7.0,)
    assert exhaustive_oracle(fleet, 4.0, 1.0).powers == (4.0,)


def test_identical_convex_pair_splits_evenly():
    fleet = Fleet([QUAD, DgSpec(2, *QUAD.coefficients, p_max=10.0)], 20.0)
    alloc = solve_dispatch(fleet, 10.0)
    assert alloc.powers == pytest.approx((5.0, 5.0), abs=1e-9)
    lam = dual_multiplier(fleet, alloc)
    assert lam == pytest.approx(eval_marginal_cost(QUAD, 5.0), rel=1e-9)


def test_linear_costs_fill_cheapest_first():
    fleet = Fleet([DgSpec(1, 0, 0, 0.01, 0, 0, 10.0), DgSpec(2, 0, 0, 0.02, 0, 0, 10.0)], 20.0)
    assert exhaustive_oracle(fleet, 6.0, 0.01).powers == pytest.approx((6.0, 0.0), abs=1e-12)
    assert solve_dispatch(fleet, 6.0).powers == pytest.approx((6.0, 0.0), abs=1e-9)


def test_case1_at_20kw_against_independent_searches():
    fleet = builtin("case1").fleet
    alloc = solve_dispatch(fleet, 20.0)
    # every case-1 cost is convex, so a local NLP solve is global
    nlp = minimize(
        lambda p: total_cost(fleet, np.clip(p, 0.0, fleet.p_max)),
        np.full(4, 5.0),
        method="SLSQP",
        bounds=[(0.0, dg.p_max) for dg in fleet.dgs],
        constraints=[{"type": "eq", "fun": lambda p: p.sum() - 20.0}],
        options={"ftol": 1e-14, "maxiter": 500},
    )
    assert alloc.cost <= nlp.fun + 1e-9
    assert alloc.as_array() == pytest.approx(nlp.x, abs=1e-3)
    # brute force over DGs 2-4 on a 0.005 kW grid with DG1 held at its optimum
    p1 = alloc.powers[0]
    sub = exhaustive_oracle(Fleet(fleet.dgs[1:], 26.0), 20.0 - p1, 0.005)
    assert alloc.cost <= total_cost(fleet, [p1, *sub.powers]) + 1e-12
    assert alloc.powers[1:] == pytest.approx(sub.powers, abs=0.01)


def test_allocation_invariants_and_errors():
    fleet = builtin("case2").fleet
    for p_l in (0.0, 3.3, 17.2, 36.0):
        alloc = solve_dispatch(fleet, p_l)
        assert abs(math.fsum(alloc.powers) - p_l) <= 1e-9 * max(1.0, p_l)
        assert all(0.0 <= p <= dg.p_max for p, dg in zip(alloc.powers, fleet.dgs))
    with pytest.raises(InfeasibleError):
        solve_dispatch(fleet, 36.5)
    with pytest.raises(InfeasibleError):
        solve_dispatch(fleet, -1.0)
    with pytest.raises(NotImplementedError):
        exhaustive_oracle(fleet, 10.0, 0.1)


def test_random_pairs_match_exhaustive_oracle():
    rng = np.random.default_rng(2024)
    cfg = OracleConfig()
    for trial in range(200):
        fleet = Fleet([random_dg(rng, 1), random_dg(rng, 2)], 16.0)
        p_l = float(rng.uniform(0.0, fleet.capacity))
        ours = solve_dispatch(fleet, p_l, cfg)
        ref = exhaustive_oracle(fleet, p_l, cfg.grid_step)
        assert abs(ours.cost - ref.cost) <= 1e-6 * max(1.0, ref.cost), (trial, ours, ref)
        # refinement may only improve on the grid
        assert ours.cost <= ref.cost + 1e-12
        assert np.abs(ours.as_array() - ref.as_array()).max() <= cfg.grid_step + 1e-9 or math.isclose(
            ours.cost, ref.cost, rel_tol=1e-9, abs_tol=1e-12
        )


def test_refinement_never_increases_cost():
    rng = np.random.default_rng(3)
    for _ in range(50):
        fleet = Fleet([random_dg(rng, k) for k in (1, 2, 3)], 20.0)
        table = DispatchTable(fleet, 0.01)
        p_l = float(rng.uniform(0.0, fleet.capacity))
        raw = solve_dispatch(fleet, p_l, OracleConfig(refine=False), table=table)
        ref = solve_dispatch(fleet, p_l, OracleConfig(), table=table)
        assert ref.cost <= raw.cost


def test_value_function_non_decreasing_over_sweep():
    for name in ("case1", "case2"):
        table = sweep_osf(builtin(name).fleet, 361)
        assert np.all(np.diff(table.costs) >= -1e-12)


def test_dual_multiplier_cases():
    fleet = builtin("case1").fleet
    alloc = solve_dispatch(fleet, 20.0)
    lam = dual_multiplier(fleet, alloc)
    interior = [eval_marginal_cost(dg, p) for dg, p in zip(fleet.dgs, alloc.powers) if 0 < p < dg.p_max]
    assert lam == pytest.approx(np.mean(interior), rel=1e-12)
    # DG at p_max is left out of the average
    saturated = solve_dispatch(fleet, 35.0)
    assert any(p == dg.p_max for p, dg in zip(saturated.powers, fleet.dgs))
    assert dual_multiplier(fleet, saturated) is not None
    skewed = Allocation((9.0, 1.0, 5.0, 5.0), total_cost(fleet, (9.0, 1.0, 5.0, 5.0)), 20.0)
    assert dual_multiplier(fleet, skewed) is None


def test_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(grid_step=0.0)
    with pytest.raises(ValueError):
        OracleConfig(grid_step=0.01, refine_tol=0.1)
