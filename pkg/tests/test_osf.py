import numpy as np
import pytest

from droopdispatch.cost_model import DgSpec, Fleet
from droopdispatch.oracle import OracleConfig
from droopdispatch.osf import OsfTable, bad_segments, check_monotonicity, sweep_osf, verify_sum
from droopdispatch.scenarios import builtin


@pytest.fixture(scope="module")
def case1_table():
    return sweep_osf(builtin("case1").fleet, 361)


@pytest.fixture(scope="module")
def case2_table():
    return sweep_osf(builtin("case2").fleet, 361)


def test_single_dg_osf_is_the_load():
    fleet = Fleet([DgSpec(1, 0.0, 0.01, 0.1, 0.0, 0.0, 5.0)], 5.0)
    table = sweep_osf(fleet, 51)
    assert np.array_equal(table.powers[:, 0], table.loads)
    assert verify_sum(table) == 0.0


def test_case1_columns_strictly_increasing(case1_table):
    g = case1_table.powers
    rise = np.diff(g, axis=0)
    p_max = case1_table.p_max
    parked = ((g[:-1] == 0) & (g[1:] == 0)) | ((g[:-1] == p_max) & (g[1:] == p_max))
    assert np.all(rise[~parked] > 0)
    assert np.all(rise >= 0)
    report = check_monotonicity(case1_table)
    assert report.criterion_met
    assert report.flagged == []


def test_case2_dg1_flagged(case2_table):
    report = check_monotonicity(case2_table)
    assert not report.criterion_met
    assert 1 in report.flagged
    dg1 = report.per_dg[0]
    assert dg1.violations
    # DG1 idles at low load, then jumps into service inside the sweep
    g1 = case2_table.powers[:, 0]
    assert np.all(g1[case2_table.loads <= 15.0] == 0.0)
    assert g1[-1] > 0
    v = dg1.violations[0]
    assert 15.0 < v.load_lo < v.load_hi < 20.0


def test_case2_optimal_region_above_the_jump(case2_table):
    # every column rises from the jump up to full load (the region where droop can be optimal)
    report = check_monotonicity(case2_table)
    hi = max(w.load_hi for v in report.per_dg for w in v.violations)
    above = case2_table.loads >= hi
    assert np.all(~bad_segments(case2_table)[above[:-1] & above[1:]])


def test_verify_sum_reports_injected_error(case1_table):
    assert verify_sum(case1_table) <= 1e-6 * 36.0
    corrupted = case1_table.powers.copy()
    corrupted[100, 2] += 0.125
    bad = OsfTable(case1_table.loads, corrupted, case1_table.costs, case1_table.ids, case1_table.p_max)
    assert verify_sum(bad) == pytest.approx(0.125, abs=1e-9)


def test_saturated_flat_is_not_a_violation():
    loads = np.linspace(0.0, 4.0, 5)
    # DG1 fills up and parks at p_max=2, DG2 idles and then rises
    powers = np.array([[0, 0], [1, 0], [2, 0], [2, 1], [2, 2]], dtype=float)
    table = OsfTable(loads, powers, np.zeros(5), (1, 2), np.array([2.0, 2.0]))
    assert check_monotonicity(table).criterion_met


def test_downward_step_is_flagged_with_widened_interval():
    loads = np.linspace(0.0, 6.0, 7)
    g1 = np.array([0, 1, 2, 1.5, 2.5, 3.0, 3.5])
    powers = np.column_stack([g1, loads - g1])
    table = OsfTable(loads, powers, np.zeros(7), (1, 2), np.array([5.0, 5.0]))
    report = check_monotonicity(table)
    assert report.flagged == [1, 2]
    v = report.per_dg[0].violations[0]
    assert (v.load_lo, v.load_hi) == (1.0, 4.0)


def test_grid_refinement_stability(case2_table):
    fine = sweep_osf(builtin("case2").fleet, 721)
    shared = fine.powers[::2]
    assert np.abs(shared - case2_table.powers).max() <= 2 * OracleConfig().grid_step


def test_equal_share_pair_in_case2(case2_table):
    g = case2_table.powers
    pairs = [
        (j, k)
        for j in range(len(g))
        for k in range(j + 1, len(g))
        if g[j, 0] == g[k, 0] and np.abs(g[j, 1:] - g[k, 1:]).max() > 1e-6
    ]
    assert pairs
    # a monotone family would need the other DGs fixed whenever g1 is
    j, k = pairs[0]
    assert case2_table.loads[j] != case2_table.loads[k]


def test_csv_round_trip(case2_table, tmp_path):
    path = tmp_path / "osf.csv"
    case2_table.to_csv(path)
    back = OsfTable.from_csv(path, case2_table.p_max)
    assert np.array_equal(back.powers, case2_table.powers)
    assert np.array_equal(back.loads, case2_table.loads)
    assert path.read_text().splitlines()[0] == "P_L[kW],g_1[kW],g_2[kW],g_3[kW],g_4[kW],cost[cost/h]"
