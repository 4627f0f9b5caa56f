import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from droopdispatch.curves import CurveError, MonotoneCurve, invert_curve, regularize_columns
from droopdispatch.droop import DroopConfig, build_droop, eval_frequency
from droopdispatch.osf import check_monotonicity, sweep_osf
from droopdispatch.scenarios import builtin
from droopdispatch.sosf import fit_sosf


def test_identity_inverts_to_identity():
    c = MonotoneCurve([0.0, 10.0], [0.0, 10.0])
    inv = invert_curve(c)
    assert np.array_equal(inv.knots_x, c.knots_x)
    assert np.array_equal(inv.knots_y, c.knots_y)


def test_double_inverts_to_half():
    inv = invert_curve(MonotoneCurve([0.0, 5.0], [0.0, 10.0]))
    assert inv.domain == (0.0, 10.0)
    assert inv(7.0) == pytest.approx(3.5, rel=1e-15)


def test_flat_segment_rejected():
    with pytest.raises(CurveError):
        MonotoneCurve([0.0, 1.0, 2.0], [0.0, 1.0, 1.0])
    with pytest.raises(CurveError):
        MonotoneCurve([0.0, 1.0, 1.0], [0.0, 1.0, 2.0])


def test_domain_checked_unless_clipped():
    c = MonotoneCurve([0.0, 1.0], [0.0, 2.0])
    with pytest.raises(CurveError):
        c(1.5)
    assert c(1.5, clip=True) == 2.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 5.0), min_size=1, max_size=20), st.lists(st.floats(0.0, 1.0), min_size=5, max_size=5))
def test_round_trip_on_random_curves(steps, probes):
    x = np.concatenate([[0.0], np.cumsum(steps)])
    y = np.concatenate([[0.0], np.cumsum(np.array(steps)[::-1] * 0.7)])
    c = MonotoneCurve(x, y)
    for t in probes:
        p = t * x[-1]
        assert c.inverse(c(p)) == pytest.approx(p, rel=1e-9, abs=1e-9)


def test_regularize_keeps_sums_and_ends():
    loads = np.linspace(0.0, 4.0, 5)
    values = np.array([[0, 1, 2, 2, 2], [0, 0, 0, 1, 2]], dtype=float)
    out, pert = regularize_columns(loads, values, eps_inv=1e-3)
    assert np.allclose(out.sum(axis=0), loads, atol=1e-12)
    assert np.array_equal(out[:, -1], values[:, -1])
    assert np.all(np.diff(out, axis=1) / np.diff(loads) >= 1e-3 * (1 - 1e-6))
    assert 0 < pert < 1e-2


def test_single_dg_identity_droop():
    cfg, (dc,) = build_droop([MonotoneCurve([0.0, 10.0], [0.0, 10.0])], DroopConfig(delta_f_max=0.5), 10.0)
    assert cfg.m == 0.05
    assert dc(4.0) == pytest.approx(0.2, rel=1e-15)
    assert eval_frequency(dc, cfg, 0.0) == 50.0
    assert eval_frequency(dc, cfg, 10.0) == pytest.approx(49.5, rel=1e-15)
    with pytest.raises(CurveError):
        eval_frequency(dc, cfg, 10.5)


def test_droop_requires_curve_from_origin_to_full_load():
    with pytest.raises(CurveError):
        build_droop([MonotoneCurve([1.0, 10.0], [0.0, 10.0])], DroopConfig(), 10.0)
    with pytest.raises(CurveError):
        build_droop([MonotoneCurve([0.0, 8.0], [0.0, 8.0])], DroopConfig(), 10.0)


@pytest.fixture(scope="module", params=["case1", "case2"])
def design(request):
    sc = builtin(request.param)
    table = sweep_osf(sc.fleet, sc.sweep_points, sc.oracle)
    fit = fit_sosf(table, check_monotonicity(table))
    curves, pert = fit.curves(sc.eps_inv)
    cfg, droops = build_droop(curves, DroopConfig(), sc.fleet.p_l_max, sc.fleet.ids)
    return sc, table, fit, curves, pert, cfg, droops


def test_synchronization_identity(design):
    sc, table, fit, curves, pert, cfg, droops = design
    x = np.concatenate([table.loads, 0.5 * (table.loads[1:] + table.loads[:-1])])
    for gamma, dc in zip(curves, droops):
        assert np.abs(dc(gamma(x)) - cfg.m * x).max() <= 1e-6
    assert pert <= 1e-4


def test_inverse_round_trip_on_100_points(design):
    _, _, _, curves, *_ = design
    gamma = curves[1]
    x = np.linspace(0.0, gamma.domain[1], 100)
    assert np.abs(gamma.inverse(gamma(x)) - x).max() <= 1e-9


def test_frequency_budget_and_zero_anchor(design):
    sc, *_, cfg, droops = design
    for dc in droops:
        assert dc.curve.range[0] == 0.0
        assert dc.curve.range[1] <= cfg.delta_f_max * (1 + 1e-12)
        assert eval_frequency(dc, cfg, 0.0) == cfg.f_star


def test_every_dg_reads_the_same_frequency_at_20kw(design):
    sc, table, _, curves, _, cfg, droops = design
    for gamma, dc in zip(curves, droops):
        assert eval_frequency(dc, cfg, gamma(20.0)) == pytest.approx(cfg.f_star - cfg.m * 20.0, abs=1e-9)
